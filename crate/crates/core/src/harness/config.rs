use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named Hamiltonian from the preset catalog with parameter overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetSpec {
    pub id: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl PresetSpec {
    pub fn new(id: &str) -> Self {
        Self { id: id.into(), params: BTreeMap::new() }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.into(), value);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceOptions {
    /// Random instances per check.
    pub instances: usize,
    /// Dimensions of the `U(N)` pairs are drawn from `2..=max_dim`.
    pub max_dim: usize,
    /// Same for the cover pairs, each of which is also solved by exhaustive lattice search.
    pub cover_max_dim: usize,
    /// Windings of the random cover elements are drawn from `−max_winding..=max_winding`.
    pub max_winding: i64,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self { instances: 200, max_dim: 8, cover_max_dim: 6, max_winding: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShelukhinSettings {
    pub grid_degree: usize,
    pub loop_samples: usize,
    pub time_nodes: usize,
}

impl Default for ShelukhinSettings {
    fn default() -> Self {
        Self { grid_degree: 16, loop_samples: 64, time_nodes: 8 }
    }
}

/// One experiment, read from a TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub preset: PresetSpec,
    #[serde(default)]
    pub second_preset: Option<PresetSpec>,
    #[serde(default)]
    pub k_values: Vec<usize>,
    /// Grid degree is `2k + 2 + grid_margin`.
    #[serde(default = "default_grid_margin")]
    pub grid_margin: usize,
    /// Minimum number of time steps; raised per k when the step bound demands it.
    #[serde(default = "default_time_steps")]
    pub time_steps: usize,
    #[serde(default = "default_flow_max_step")]
    pub flow_max_step: f64,
    /// Absolute bound on every row's residual (defect and distance runs: on the measured value).
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Largest allowed log-log slope of `|residual|` against k.
    #[serde(default)]
    pub max_slope: Option<f64>,
    /// Residuals below this are treated as numerical noise by the slope fit.
    #[serde(default = "default_noise_floor")]
    pub noise_floor: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub distance: DistanceOptions,
    #[serde(default)]
    pub shelukhin: ShelukhinSettings,
}

fn default_grid_margin() -> usize {
    8
}
fn default_time_steps() -> usize {
    200
}
fn default_flow_max_step() -> f64 {
    1e-2
}
fn default_noise_floor() -> f64 {
    1e-6
}

pub const EXPERIMENTS: [&str; 6] = ["theorem1", "prop53", "theorem2", "defect", "distance", "toeplitz-dump"];

impl ExperimentConfig {
    pub fn new(experiment: &str, preset: PresetSpec, k_values: Vec<usize>) -> Self {
        Self {
            experiment: experiment.into(),
            preset,
            second_preset: None,
            k_values,
            grid_margin: default_grid_margin(),
            time_steps: default_time_steps(),
            flow_max_step: default_flow_max_step(),
            tolerance: None,
            max_slope: None,
            noise_floor: default_noise_floor(),
            output: None,
            seed: 0,
            distance: DistanceOptions::default(),
            shelukhin: ShelukhinSettings::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !EXPERIMENTS.contains(&self.experiment.as_str()) {
            return bad(format!("unknown experiment `{}`; expected one of {EXPERIMENTS:?}", self.experiment));
        }
        if self.experiment != "distance" {
            if self.k_values.is_empty() {
                return bad("k_values is empty".into());
            }
            if self.k_values[0] == 0 {
                return bad("k_values must be positive".into());
            }
            if self.k_values.windows(2).any(|w| w[1] <= w[0]) {
                return bad(format!("k_values must be strictly increasing, got {:?}", self.k_values));
            }
            if self.preset.id.is_empty() {
                return bad("preset.id is missing".into());
            }
            for spec in std::iter::once(&self.preset).chain(&self.second_preset) {
                super::presets::build(spec)?;
            }
        }
        if self.time_steps == 0 {
            return bad("time_steps must be positive".into());
        }
        if !(self.flow_max_step > 0.0 && self.flow_max_step <= 0.1) {
            return bad(format!("flow_max_step must lie in (0, 0.1], got {}", self.flow_max_step));
        }
        if !(self.noise_floor >= 0.0) {
            return bad("noise_floor must be non-negative".into());
        }
        if self.experiment == "defect" && self.second_preset.is_none() {
            return bad("the defect experiment needs second_preset".into());
        }
        let d = &self.distance;
        if d.instances == 0 || d.max_dim < 2 || !(2..=8).contains(&d.cover_max_dim) || d.max_winding < 0 {
            return bad("distance: need instances > 0, max_dim ≥ 2, cover_max_dim in 2..=8, max_winding ≥ 0".into());
        }
        let s = &self.shelukhin;
        if s.grid_degree < 2 || s.time_nodes == 0 || s.loop_samples < 4 || !s.loop_samples.is_multiple_of(4) {
            return bad("shelukhin: need grid_degree ≥ 2, time_nodes > 0, loop_samples a positive multiple of 4".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
experiment = "prop53"
k_values = [8, 16, 32]
time_steps = 400
seed = 7

[preset]
id = "mixed"
params = { a = 1.0 }
"#;

    #[test]
    fn parses_and_fills_defaults() {
        let c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(c.k_values, vec![8, 16, 32]);
        assert_eq!(c.preset.params["a"], 1.0);
        assert_eq!(c.grid_margin, 8);
        assert_eq!(c.distance, DistanceOptions::default());
        let echo = toml::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&echo).unwrap(), c);
    }

    #[test]
    fn rejects_bad_configs() {
        for (from, to) in [
            ("[8, 16, 32]", "[8, 8, 32]"),
            ("[8, 16, 32]", "[]"),
            ("time_steps = 400", "time_steps = 0"),
            ("\"prop53\"", "\"nope\""),
            ("seed = 7", "seed = 7\nunknown = 1"),
        ] {
            let text = SAMPLE.replace(from, to);
            assert!(ExperimentConfig::from_toml(&text).is_err(), "{to}");
        }
        let defect = SAMPLE.replace("\"prop53\"", "\"defect\"");
        assert!(matches!(ExperimentConfig::from_toml(&defect), Err(Error::Config(_))));
    }
}
