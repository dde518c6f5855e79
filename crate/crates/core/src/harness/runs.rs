//! Experiment drivers. Each k is an independent computation; rows are computed concurrently.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use log::info;
use nalgebra::linalg::SymmetricEigen;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{HamiltonianFlow, RotationFlow, RoundStructure};
use crate::harness::config::ExperimentConfig;
use crate::harness::fit::{levels_off, local_slopes, loglog_trend};
use crate::harness::presets::{build, Preset};
use crate::harness::report::{Check, DistanceRow, Report, SweepRow, TraceRow};
use crate::invariants::{curvature_term, defect, scalar_curvature, shelukhin, ShelukhinOptions};
use crate::propagate::{propagate_ks, propagate_toeplitz, pushforward_unitary, steps_for, xi_path};
use crate::quantize::{grid_degree_for, kostant_souriau, lambda_prime, matrix_rows, toeplitz, trace_expansion_residual, QuantumSpace};
use crate::sphere::{calabi, Hamiltonian, InverseFlow, SphereGrid};
use crate::unimetric::{
    cover_distance, cover_lattice, distance, exp_i_hermitian, operator_norm, random_cover_element, random_unitary,
    solve_lattice, solve_lattice_exhaustive, CMatrix, Unitary, UnitaryWithPhase,
};

/// Gauss–Legendre nodes in time for `Cal`; exact for the preset time profiles to roundoff.
const CALABI_TIME_NODES: usize = 12;
/// Default bounds used when the config gives none.
const THEOREM1_TOLERANCE: f64 = 1e-5;
const BOUNDED_SLOPE: f64 = 0.2;
const TRACE_SLOPE: f64 = -0.8;
const METRIC_TOL: f64 = 1e-10;
const COLLAPSE_TOL: f64 = 1e-9;

struct Setting {
    space: QuantumSpace,
    grid: SphereGrid,
}

impl Setting {
    fn new(k: usize, config: &ExperimentConfig) -> Result<Self> {
        Ok(Self { space: QuantumSpace::new(k)?, grid: SphereGrid::new(grid_degree_for(k, config.grid_margin)) })
    }
}

/// Rows for every k, computed in parallel, with wall-clock seconds.
fn sweep<R: Send>(config: &ExperimentConfig, row: impl Fn(usize) -> Result<R> + Sync) -> Result<Vec<(R, f64)>> {
    config
        .k_values
        .par_iter()
        .map(|&k| {
            let start = Instant::now();
            let r = row(k)?;
            let secs = start.elapsed().as_secs_f64();
            info!("{}: k = {k} done in {secs:.2} s", config.experiment);
            Ok((r, secs))
        })
        .collect()
}

/// `Δt·k·‖G‖` stays below the stepper limit when `‖G‖ ≤ 2·sup|H|`.
fn steps(k: usize, sup_bound: f64, config: &ExperimentConfig) -> usize {
    steps_for(k, 2.0 * sup_bound.max(1e-3), config.time_steps)
}

fn predicted_phase(k: usize, calabi: f64, sh: f64) -> f64 {
    let k = k as f64;
    -(k / (2.0 * PI)) * ((k + lambda_prime()) * calabi + 0.5 * sh)
}

fn shelukhin_options(config: &ExperimentConfig) -> ShelukhinOptions {
    ShelukhinOptions { loop_samples: config.shelukhin.loop_samples, time_nodes: config.shelukhin.time_nodes }
}

fn finish_sweep(config: &ExperimentConfig, rows: Vec<(SweepRow, f64)>, default_slope: Option<f64>, default_tol: Option<f64>) -> Report<SweepRow> {
    let mut report = Report::new(config);
    report.timings = rows.iter().map(|(r, s)| (r.k, *s)).collect();
    report.rows = rows.into_iter().map(|(r, _)| r).collect();
    let values: Vec<(usize, f64)> = report.rows.iter().map(|r| (r.k, r.residual.unwrap_or(r.measured))).collect();
    let what = if report.rows.iter().all(|r| r.residual.is_some()) { "|residual|" } else { "|measured|" };
    let trend = loglog_trend(&values, config.noise_floor);
    report.summary.insert("max_abs".into(), trend.max_abs);
    if let Some(s) = trend.slope {
        report.summary.insert("slope".into(), s);
    }
    if let Some(tol) = config.tolerance.or(default_tol) {
        let worst = values.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
        report.checks.push(Check::new(format!("{what} ≤ {tol:e}"), worst <= tol, format!("max {worst:.3e}")));
    }
    if let Some(bound) = config.max_slope.or(default_slope) {
        report.checks.push(Check::new(format!("log-log slope of {what} ≤ {bound}"), trend.within(bound), trend.describe()));
    }
    report
}

/// Theorem 1 on a rotation-family preset: the lifted phase of `Ψ̃_k` against `−(k/2π)((k+λ')Cal + ½Sh)`.
pub fn run_theorem1(config: &ExperimentConfig) -> Result<Report<SweepRow>> {
    let preset = build(&config.preset)?;
    if !preset.holomorphic {
        return Err(Error::Config(format!("preset `{}` does not generate a holomorphic flow", preset.id)));
    }
    let flow = HamiltonianFlow::new(preset.path.clone(), config.flow_max_step)?;
    let sh_grid = SphereGrid::new(config.shelukhin.grid_degree);
    let sh = shelukhin(&sh_grid, &RoundStructure, &preset.path, &flow, shelukhin_options(config))?.total;
    let rows = sweep(config, |k| {
        let s = Setting::new(k, config)?;
        let cal = calabi(&s.grid, &preset.path, CALABI_TIME_NODES);
        let n = steps(k, preset.sup_bound, config);
        let measured = pushforward_unitary(&s.space, &s.grid, &preset.path, n, config.flow_max_step)?.endpoint.phase;
        let predicted = predicted_phase(k, cal, sh);
        Ok(SweepRow {
            k,
            grid_degree: s.grid.degree(),
            steps: n,
            measured,
            predicted: Some(predicted),
            residual: Some(measured - predicted),
            calabi: Some(cal),
            shelukhin: Some(sh),
            lambda_prime: Some(lambda_prime()),
        })
    })?;
    let mut report = finish_sweep(config, rows, None, Some(THEOREM1_TOLERANCE));
    report.summary.insert("shelukhin".into(), sh);
    Ok(report)
}

/// Prop 5.3: the lifted phase of `ξ̃₁` against `−(k/2π)((k+λ')Cal + ½∫∫ H̄_t S(j_t))`.
pub fn run_prop53(config: &ExperimentConfig) -> Result<Report<SweepRow>> {
    let preset = build(&config.preset)?;
    let flow = HamiltonianFlow::new(preset.path.clone(), config.flow_max_step)?;
    let sh_grid = SphereGrid::new(config.shelukhin.grid_degree);
    let curvature = curvature_term(&sh_grid, &RoundStructure, &preset.path, &flow, config.shelukhin.time_nodes)?;
    let rows = sweep(config, |k| {
        let s = Setting::new(k, config)?;
        let cal = calabi(&s.grid, &preset.path, CALABI_TIME_NODES);
        let n = steps(k, preset.sup_bound, config);
        let measured = xi_path(&s.space, &s.grid, &preset.path, &flow, n)?.endpoint.phase;
        let predicted = predicted_phase(k, cal, curvature);
        Ok(SweepRow {
            k,
            grid_degree: s.grid.degree(),
            steps: n,
            measured,
            predicted: Some(predicted),
            residual: Some(measured - predicted),
            calabi: Some(cal),
            shelukhin: Some(curvature),
            lambda_prime: Some(lambda_prime()),
        })
    })?;
    let mut report = finish_sweep(config, rows, Some(BOUNDED_SLOPE), None);
    report.summary.insert("curvature_integral".into(), curvature);
    Ok(report)
}

fn distance_row(k: usize, s: &Setting, n: usize, measured: f64) -> SweepRow {
    SweepRow {
        k,
        grid_degree: s.grid.degree(),
        steps: n,
        measured,
        predicted: None,
        residual: None,
        calabi: None,
        shelukhin: None,
        lambda_prime: None,
    }
}

/// `d̃(Φ̃_k(γ), Φ̃_k^KS(γ))`: Toeplitz against Kostant–Souriau quantization of the same path.
pub fn run_theorem2(config: &ExperimentConfig) -> Result<Report<SweepRow>> {
    let preset = build(&config.preset)?;
    let rows = sweep(config, |k| {
        let s = Setting::new(k, config)?;
        let n = steps(k, preset.sup_bound, config);
        let t = propagate_toeplitz(&s.space, &s.grid, &preset.path, n)?;
        let ks = propagate_ks(&s.space, &s.grid, &preset.path, n)?;
        Ok(distance_row(k, &s, n, cover_distance(&t.endpoint, &ks.endpoint)?))
    })?;
    Ok(finish_sweep(config, rows, Some(BOUNDED_SLOPE), None))
}

fn inverse_flow(preset: &Preset, max_step: f64) -> Result<Arc<dyn InverseFlow>> {
    Ok(match preset.rotation_axis {
        Some(axis) => Arc::new(RotationFlow::new(axis)),
        None => Arc::new(HamiltonianFlow::new(preset.path.clone(), max_step)?),
    })
}

/// Quasimorphism defect `d̃(Φ̃_k(A)Φ̃_k(B), Φ̃_k(A ⋆ B))`.
pub fn run_defect(config: &ExperimentConfig) -> Result<Report<SweepRow>> {
    let a = build(&config.preset)?;
    let b = build(config.second_preset.as_ref().ok_or_else(|| Error::Config("defect needs second_preset".into()))?)?;
    let flow_a = inverse_flow(&a, config.flow_max_step)?;
    let rows = sweep(config, |k| {
        let s = Setting::new(k, config)?;
        let n = steps(k, a.sup_bound + b.sup_bound, config);
        Ok(distance_row(k, &s, n, defect(&s.space, &s.grid, &a.path, &b.path, flow_a.clone(), n)?))
    })?;
    // Boundedness: an explicit max_slope asks for the global fit; otherwise the sequence must level off.
    let mut report = finish_sweep(config, rows, None, None);
    if config.max_slope.is_none() {
        let points: Vec<(usize, f64)> = report.rows.iter().map(|r| (r.k, r.measured)).collect();
        let noise = points.iter().all(|(_, v)| v.abs() <= config.noise_floor);
        let slopes = local_slopes(&points);
        let shown: Vec<String> = slopes.iter().map(|s| format!("{s:.3}")).collect();
        report.checks.push(Check::new(
            format!("defect levels off (local slopes non-increasing, last ≤ {BOUNDED_SLOPE})"),
            noise || levels_off(&points, BOUNDED_SLOPE),
            if noise { "below noise floor".into() } else { format!("local slopes [{}]", shown.join(", ")) },
        ));
    }
    Ok(report)
}

fn random_hermitian<R: Rng>(n: usize, norm: f64, rng: &mut R) -> CMatrix {
    let m = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let h = (&m + m.adjoint()).scale(0.5);
    let scale = norm / operator_norm(&h).max(1e-300);
    h.scale(scale)
}

/// Random-instance comparisons for `d` on `U(N)` and `d̃` on its universal cover.
pub fn run_distance(config: &ExperimentConfig) -> Result<Report<DistanceRow>> {
    let opts = &config.distance;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rows: BTreeMap<usize, DistanceRow> = BTreeMap::new();
    fn row(rows: &mut BTreeMap<usize, DistanceRow>, n: usize) -> &mut DistanceRow {
        rows.entry(n).or_insert_with(|| DistanceRow {
            dim: n,
            instances: 0,
            metric_violation: f64::NEG_INFINITY,
            lattice_checked: 0,
            lattice_mismatches: 0,
            cover_bound_violation: f64::NEG_INFINITY,
            collapse_checked: 0,
            collapse_gap: 0.0,
        })
    }
    let start = Instant::now();
    for _ in 0..opts.instances {
        // Metric axioms and the norm comparison on U(N).
        let n = rng.random_range(2..=opts.max_dim);
        let (u, v, w) = (random_unitary(n, &mut rng), random_unitary(n, &mut rng), random_unitary(n, &mut rng));
        let d = distance(&u, &v)?;
        let chord = operator_norm(&(u.matrix() - v.matrix()));
        let violation = [
            distance(&u, &u)?,
            (d - distance(&v, &u)?).abs(),
            d - distance(&u, &w)? - distance(&w, &v)?,
            chord - d,
            d - 0.5 * PI * chord,
        ]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
        let r = row(&mut rows, n);
        r.instances += 1;
        r.metric_violation = r.metric_violation.max(violation);

        // Lattice solver against exhaustive search, and the a priori bounds on d̃.
        let n = rng.random_range(2..=opts.cover_max_dim);
        let wa = rng.random_range(-opts.max_winding..=opts.max_winding);
        let wb = rng.random_range(-opts.max_winding..=opts.max_winding);
        let (a, b) = (random_cover_element(n, wa, &mut rng), random_cover_element(n, wb, &mut rng));
        let problem = cover_lattice(&a, &b)?;
        let dt = solve_lattice(&problem).0;
        let lower = (b.phase - a.phase).abs() / n as f64;
        let r = row(&mut rows, n);
        r.lattice_checked += 1;
        if dt != solve_lattice_exhaustive(&problem) {
            r.lattice_mismatches += 1;
        }
        r.cover_bound_violation = r.cover_bound_violation.max((lower - dt).max(dt - lower - 2.0 * PI));

        // Nearby pairs: (e^{iH}u, φ + tr H) with ‖H‖ up to twice π/(2N), filtered to d̃ ≤ π/(2N).
        let radius = PI / (2.0 * n as f64);
        let h = random_hermitian(n, rng.random_range(0.0..2.0) * radius, &mut rng);
        let near = UnitaryWithPhase::new(Unitary::new(exp_i_hermitian(&h) * a.u.matrix())?, a.phase + h.trace().re)?;
        let dt = cover_distance(&a, &near)?;
        if dt <= radius {
            let gap = (dt - distance(&a.u, &near.u)?).abs();
            let r = row(&mut rows, n);
            r.collapse_checked += 1;
            r.collapse_gap = r.collapse_gap.max(gap);
        }
    }
    let mut report = Report::new(config);
    report.rows = rows.into_values().collect();
    report.timings = vec![(opts.instances, start.elapsed().as_secs_f64())];
    let worst = |f: fn(&DistanceRow) -> f64| report.rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let metric = worst(|r| r.metric_violation);
    let cover = worst(|r| r.cover_bound_violation);
    let collapse = worst(|r| r.collapse_gap);
    let mismatches: usize = report.rows.iter().map(|r| r.lattice_mismatches).sum();
    let checked: usize = report.rows.iter().map(|r| r.lattice_checked).sum();
    let collapsed: usize = report.rows.iter().map(|r| r.collapse_checked).sum();
    report.summary = BTreeMap::from([
        ("metric_violation".into(), metric),
        ("cover_bound_violation".into(), cover),
        ("collapse_gap".into(), collapse),
        ("lattice_mismatches".into(), mismatches as f64),
    ]);
    report.checks = vec![
        Check::new(
            "metric axioms and ‖u−v‖ ≤ d ≤ (π/2)‖u−v‖",
            metric <= METRIC_TOL,
            format!("{} pairs, worst violation {metric:.2e}", opts.instances),
        ),
        Check::new("lattice solver equals exhaustive search", mismatches == 0, format!("{mismatches} of {checked} differ")),
        Check::new("|ψ−φ|/N ≤ d̃ ≤ |ψ−φ|/N + 2π", cover <= METRIC_TOL, format!("worst violation {cover:.2e}")),
        Check::new(
            "d̃ = d when d̃ ≤ π/(2N)",
            collapsed > 0 && collapse <= COLLAPSE_TOL,
            format!("{collapsed} pairs, worst gap {collapse:.2e}"),
        ),
    ];
    Ok(report)
}

/// Matrices of one `k` as `(re, im)` rows.
#[derive(Clone, Debug, Serialize)]
pub struct MatrixDump {
    pub k: usize,
    pub toeplitz: Vec<Vec<(f64, f64)>>,
    pub toeplitz_spectrum: Vec<f64>,
    pub kostant_souriau: Vec<Vec<(f64, f64)>>,
}

/// `T_k(H₀)`, `Π K_k(H₀) Π`, and the trace expansion residual with `λ'` and `S(j_round)`.
pub fn run_toeplitz_dump(config: &ExperimentConfig) -> Result<(Report<TraceRow>, Vec<MatrixDump>)> {
    let preset = build(&config.preset)?;
    let rows = sweep(config, |k| {
        let s = Setting::new(k, config)?;
        let f = s.grid.sample(|x| preset.path.value(0.0, x));
        let t = toeplitz(&s.space, &s.grid, &f)?;
        let ks = kostant_souriau(&s.space, &s.grid, &preset.path, 0.0)?;
        let curvature = scalar_curvature(&RoundStructure, &s.grid)?;
        let residual = trace_expansion_residual(&s.grid, &ks, &f, &curvature.values);
        let mut spectrum: Vec<f64> = SymmetricEigen::new(t.matrix.clone()).eigenvalues.iter().copied().collect();
        spectrum.sort_by(|a, b| b.total_cmp(a));
        let row = TraceRow {
            k,
            grid_degree: s.grid.degree(),
            toeplitz_trace: t.trace().re,
            ks_trace: ks.trace().re,
            expansion: ks.trace().re - residual,
            residual,
            scaled_residual: 2.0 * PI / k as f64 * residual,
            hermitian_defect: t.hermitian_defect().max(ks.hermitian_defect()),
        };
        let dump = MatrixDump {
            k,
            toeplitz: matrix_rows(&t.matrix),
            toeplitz_spectrum: spectrum,
            kostant_souriau: matrix_rows(&ks.matrix),
        };
        Ok((row, dump))
    })?;
    let mut report = Report::new(config);
    report.timings = rows.iter().map(|((r, _), s)| (r.k, *s)).collect();
    let (rows, dumps): (Vec<TraceRow>, Vec<MatrixDump>) = rows.into_iter().map(|(pair, _)| pair).unzip();
    report.rows = rows;
    let scaled: Vec<(usize, f64)> = report.rows.iter().map(|r| (r.k, r.scaled_residual)).collect();
    let trend = loglog_trend(&scaled, config.noise_floor);
    let herm = report.rows.iter().map(|r| r.hermitian_defect).fold(0.0, f64::max);
    report.summary.insert("max_scaled_residual".into(), trend.max_abs);
    if let Some(s) = trend.slope {
        report.summary.insert("slope".into(), s);
    }
    let bound = config.max_slope.unwrap_or(TRACE_SLOPE);
    report.checks.push(Check::new("operators are Hermitian", herm <= 1e-10, format!("max defect {herm:.2e}")));
    report.checks.push(Check::new(format!("log-log slope of scaled residual ≤ {bound}"), trend.within(bound), trend.describe()));
    if let Some(tol) = config.tolerance {
        let worst = report.rows.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
        report.checks.push(Check::new(format!("|residual| ≤ {tol:e}"), worst <= tol, format!("max {worst:.3e}")));
    }
    Ok((report, dumps))
}

/// Runs the configured experiment, writes its files under `out`, and returns the check lines and overall verdict.
pub fn execute(config: &ExperimentConfig, out: &Path) -> Result<(Vec<String>, bool)> {
    config.validate()?;
    macro_rules! finish {
        ($report:expr) => {{
            let report = $report;
            report.write(out)?;
            Ok((report.check_lines(), report.passed()))
        }};
    }
    match config.experiment.as_str() {
        "theorem1" => finish!(run_theorem1(config)?),
        "prop53" => finish!(run_prop53(config)?),
        "theorem2" => finish!(run_theorem2(config)?),
        "defect" => finish!(run_defect(config)?),
        "distance" => finish!(run_distance(config)?),
        "toeplitz-dump" => {
            let (report, dumps) = run_toeplitz_dump(config)?;
            report.write(out)?;
            let dir = out.join("matrices");
            std::fs::create_dir_all(&dir)?;
            for d in &dumps {
                std::fs::write(dir.join(format!("k{:03}.json", d.k)), serde_json::to_string(d)? + "\n")?;
            }
            Ok((report.check_lines(), report.passed()))
        }
        other => Err(Error::Config(format!("unknown experiment `{other}`"))),
    }
}
