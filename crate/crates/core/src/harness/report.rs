//! Report rows, checks and their on-disk form: `rows.csv`, `report.json`, `timings.json`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::harness::config::ExperimentConfig;

/// One k of a sweep. `calabi`, `shelukhin` and `lambda_prime` are the exact inputs of `predicted`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub k: usize,
    pub grid_degree: usize,
    pub steps: usize,
    pub measured: f64,
    pub predicted: Option<f64>,
    pub residual: Option<f64>,
    pub calabi: Option<f64>,
    /// `Sh` for Theorem 1; its curvature integral for Prop 5.3.
    pub shelukhin: Option<f64>,
    pub lambda_prime: Option<f64>,
}

/// Per-dimension summary of the distance oracles.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceRow {
    pub dim: usize,
    pub instances: usize,
    /// Worst violation of `‖u−v‖ ≤ d ≤ (π/2)‖u−v‖` and of the metric axioms (≤ 0 means none).
    pub metric_violation: f64,
    /// Instances compared against exhaustive search, and how many disagreed.
    pub lattice_checked: usize,
    pub lattice_mismatches: usize,
    /// Worst violation of `|ψ−φ|/N ≤ d̃ ≤ |ψ−φ|/N + 2π`.
    pub cover_bound_violation: f64,
    pub collapse_checked: usize,
    /// Largest `|d̃ − d|` on pairs with `d̃ ≤ π/(2N)`.
    pub collapse_gap: f64,
}

/// Trace data of `T_k(f)` and `Π K_k(f) Π` at `t = 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub k: usize,
    pub grid_degree: usize,
    pub toeplitz_trace: f64,
    pub ks_trace: f64,
    pub expansion: f64,
    pub residual: f64,
    /// `(2π/k)·residual`
    pub scaled_residual: f64,
    pub hermitian_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metadata {
    pub experiment: String,
    pub version: String,
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report<R> {
    pub metadata: Metadata,
    #[serde(skip)]
    pub rows: Vec<R>,
    pub summary: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    /// Wall-clock seconds per row; kept out of `report.json` so that file is reproducible.
    #[serde(skip)]
    pub timings: Vec<(usize, f64)>,
}

impl<R: Serialize> Report<R> {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            metadata: Metadata {
                experiment: config.experiment.clone(),
                version: env!("CARGO_PKG_VERSION").into(),
                config: config.clone(),
            },
            rows: Vec::new(),
            summary: BTreeMap::new(),
            checks: Vec::new(),
            timings: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut csv = csv::Writer::from_path(dir.join("rows.csv"))?;
        for row in &self.rows {
            csv.serialize(row)?;
        }
        csv.flush()?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)? + "\n")?;
        let timings: Vec<BTreeMap<&str, f64>> =
            self.timings.iter().map(|(k, s)| BTreeMap::from([("k", *k as f64), ("seconds", *s)])).collect();
        std::fs::write(dir.join("timings.json"), serde_json::to_string_pretty(&timings)? + "\n")?;
        Ok(())
    }

    pub fn check_lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| format!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
            .collect()
    }
}
