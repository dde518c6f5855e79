//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::linalg::SymmetricEigen;
use preq_core::flow::{DeformedStructure, HamiltonianFlow, PushedStructure, RoundStructure, StructureSource};
use preq_core::harness::{
    levels_off, local_slopes, loglog_trend, run_defect, run_distance, run_prop53, run_theorem1, run_theorem2, DistanceOptions,
    ExperimentConfig, PresetSpec, Report, SweepRow,
};
use preq_core::invariants::{curvature_at, scalar_curvature, shelukhin, ShelukhinOptions, TOTAL_CURVATURE};
use preq_core::quantize::{dimension, grid_degree_for, toeplitz, trace_expansion_check, QuantumSpace};
use preq_core::sphere::{
    calabi, smoothstep, star_product, HamiltonianPath, InverseFlow, Polynomial, Reparameterized, SphereGrid, Term, TimeProfile,
    Vec3, VOLUME,
};
use preq_core::Result;

const NOISE_FLOOR: f64 = 1e-6;
const SWEEP: [usize; 4] = [8, 16, 32, 64];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome { passed, detail: detail.into() })
}

fn poly(label: &str, terms: &[(f64, TimeProfile, [u32; 3])]) -> HamiltonianPath {
    HamiltonianPath::new(label, Polynomial::new(terms.iter().map(|&(c, p, e)| Term::new(c, p, e)).collect()))
}

fn sweep_config(experiment: &str, preset: PresetSpec, ks: &[usize]) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(experiment, preset, ks.to_vec());
    c.time_steps = 400;
    c.noise_floor = NOISE_FLOOR;
    c
}

fn measured(report: &Report<SweepRow>) -> Vec<(usize, f64)> {
    report.rows.iter().map(|r| (r.k, r.measured)).collect()
}

fn fmt_values(points: &[(usize, f64)]) -> String {
    points.iter().map(|(k, v)| format!("{k}:{v:.4}")).collect::<Vec<_>>().join(" ")
}

fn dimension_law() -> Result<Outcome> {
    let mut bad = Vec::new();
    for k in 1..=64 {
        if QuantumSpace::new(k)?.dim() != k + 1 || dimension(k) != k + 1 {
            bad.push(k);
        }
    }
    outcome(bad.is_empty(), format!("dim H_k = k+1 for k = 1..64; failures at {bad:?}"))
}

fn distance_checks() -> Result<Report<preq_core::harness::DistanceRow>> {
    let mut c = ExperimentConfig::new("distance", PresetSpec::default(), vec![]);
    c.seed = 20261017;
    c.distance = DistanceOptions { instances: 200, max_dim: 8, cover_max_dim: 6, max_winding: 3 };
    run_distance(&c)
}

fn toeplitz_spectrum() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for k in [8, 32, 128] {
        let space = QuantumSpace::new(k)?;
        let grid = SphereGrid::new(grid_degree_for(k, 1));
        let t = toeplitz(&space, &grid, &grid.sample(|x| x[2]))?;
        let mut eig: Vec<f64> = SymmetricEigen::new(t.matrix).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        for (m, e) in eig.iter().enumerate() {
            worst = worst.max((e - (k as f64 - 2.0 * m as f64) / (k as f64 + 2.0)).abs());
        }
    }
    outcome(worst <= 1e-9, format!("max |λ_m − (k−2m)/(k+2)| = {worst:.2e} over k ∈ {{8, 32, 128}}"))
}

fn trace_expansion() -> Result<Outcome> {
    let ks = [16, 32, 64, 128];
    let symbols = [
        ("1", poly("1", &[(1.0, TimeProfile::Constant, [0, 0, 0])])),
        ("x3", poly("x3", &[(1.0, TimeProfile::Constant, [0, 0, 1])])),
        ("x3^2", poly("x3^2", &[(1.0, TimeProfile::Constant, [0, 0, 2])])),
    ];
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, f) in &symbols {
        let mut scaled = Vec::new();
        for &k in &ks {
            let space = QuantumSpace::new(k)?;
            let grid = SphereGrid::new(grid_degree_for(k, 2));
            let s = scalar_curvature(&RoundStructure, &grid)?;
            let r = trace_expansion_check(&space, &grid, f, &s.values)?;
            if *name == "1" && r.abs() > 1e-8 {
                passed = false;
            }
            scaled.push((k, 2.0 * PI / k as f64 * r));
        }
        let floored = loglog_trend(&scaled, NOISE_FLOOR);
        let raw = loglog_trend(&scaled, 0.0);
        passed &= floored.within(-0.8);
        parts.push(format!(
            "f={name}: max scaled {:.1e}, slope above floor {}, unfloored slope {}",
            floored.max_abs,
            floored.slope.map_or("n/a".into(), |s| format!("{s:.2}")),
            raw.slope.map_or("n/a".into(), |s| format!("{s:.2}")),
        ));
    }
    outcome(passed, parts.join("; "))
}

fn theorem1() -> Result<Outcome> {
    let ks: Vec<usize> = (1..=8).map(|i| 8 * i).collect();
    let c = 0.7;
    let mut passed = true;
    let mut parts = Vec::new();
    for preset in [PresetSpec::new("constant").with("c", c), PresetSpec::new("const_plus_x3").with("c", c)] {
        let id = preset.id.clone();
        let report = run_theorem1(&sweep_config("theorem1", preset, &ks))?;
        let worst = report.rows.iter().map(|r| r.residual.unwrap().abs()).fold(0.0, f64::max);
        let slowest = report.timings.iter().map(|t| t.1).fold(0.0, f64::max);
        passed &= report.passed() && worst <= 1e-5 && slowest < 60.0;
        if id == "constant" {
            let closed = report.rows.iter().map(|r| (r.measured + (r.k * (r.k + 1)) as f64 * c).abs()).fold(0.0, f64::max);
            passed &= closed <= 1e-5;
            parts.push(format!("H≡c: |phase + kc(k+1)| ≤ {closed:.1e}"));
        }
        parts.push(format!("{id}: max |residual| {worst:.1e}, slowest k {slowest:.1}s"));
    }
    outcome(passed, parts.join("; "))
}

fn prop53() -> Result<Outcome> {
    let report = run_prop53(&sweep_config("prop53", PresetSpec::new("mixed"), &SWEEP))?;
    let residuals: Vec<(usize, f64)> = report.rows.iter().map(|r| (r.k, r.residual.unwrap())).collect();
    let trend = loglog_trend(&residuals, NOISE_FLOOR);
    let predicted: Vec<String> = report.rows.iter().map(|r| format!("{:.4}", r.predicted.unwrap())).collect();
    outcome(
        trend.within(0.2),
        format!(
            "H = sin(πt)x₁ + t·x₃², predicted [{}], residual: {}, unfloored slope {:.2}",
            predicted.join(", "),
            trend.describe(),
            loglog_trend(&residuals, 0.0).slope.unwrap_or(f64::NAN)
        ),
    )
}

fn theorem2() -> Result<Outcome> {
    let mut passed = true;
    let mut parts = Vec::new();
    for id in ["x3_squared", "mixed"] {
        let report = run_theorem2(&sweep_config("theorem2", PresetSpec::new(id), &SWEEP))?;
        let points = measured(&report);
        let trend = loglog_trend(&points, NOISE_FLOOR);
        passed &= trend.within(0.2);
        parts.push(format!("{id}: d̃ [{}], slope {:.3}", fmt_values(&points), trend.slope.unwrap_or(f64::NAN)));
    }
    outcome(passed, parts.join("; "))
}

fn defect() -> Result<Outcome> {
    let mut c = sweep_config("defect", PresetSpec::new("x1"), &SWEEP);
    c.second_preset = Some(PresetSpec::new("x3_squared"));
    let generic = run_defect(&c)?;
    let points = measured(&generic);
    let slopes: Vec<String> = local_slopes(&points).iter().map(|s| format!("{s:.2}")).collect();
    let global = loglog_trend(&points, NOISE_FLOOR).slope.unwrap_or(f64::NAN);
    let bounded = levels_off(&points, 0.2);

    let mut c = sweep_config("defect", PresetSpec::new("x3"), &SWEEP);
    c.second_preset = Some(PresetSpec::new("const_plus_x3").with("c", 0.4).with("a", -1.3));
    let commuting = run_defect(&c)?;
    let worst = commuting.rows.iter().map(|r| r.measured).fold(0.0, f64::max);
    outcome(
        bounded && worst <= 1e-6,
        format!(
            "x1 with x3²: d̃ [{}], local slopes [{}], global slope {global:.2}; commuting rotations max {worst:.1e}",
            fmt_values(&points),
            slopes.join(", ")
        ),
    )
}

fn calabi_properties() -> Result<Outcome> {
    let grid = SphereGrid::new(48);
    let pairs = [
        (poly("x3^2", &[(1.0, TimeProfile::Constant, [0, 0, 2])]), poly("mixed", &[(1.0, TimeProfile::SinPi, [1, 0, 0]), (1.0, TimeProfile::Linear, [0, 0, 2])])),
        (poly("mixed", &[(1.0, TimeProfile::SinPi, [1, 0, 0]), (1.0, TimeProfile::Linear, [0, 0, 2])]), poly("saddle+c", &[(1.0, TimeProfile::CosPi, [1, 1, 0]), (0.3, TimeProfile::Constant, [0, 0, 0])])),
    ];
    let mut worst: f64 = 0.0;
    for (a, b) in &pairs {
        let flow: Arc<dyn InverseFlow> = Arc::new(HamiltonianFlow::new(a.clone(), 1e-3)?);
        let ab = star_product(a, b, flow);
        worst = worst.max((calabi(&grid, &ab, 12) - calabi(&grid, a, 12) - calabi(&grid, b, 12)).abs());
    }
    let mut rot: f64 = 0.0;
    for tau in [0.3, 1.0, 2.5] {
        rot = rot.max((calabi(&grid, &Polynomial::constant(-tau), 4) + tau * VOLUME).abs());
    }
    outcome(
        worst <= 1e-7 && rot <= 1e-12,
        format!("star-product additivity error {worst:.1e}; |Cal(R(τ)) + τ·Vol| ≤ {rot:.1e} with Vol = 2π"),
    )
}

fn scalar_curvature_checks() -> Result<Outcome> {
    let round = scalar_curvature(&RoundStructure, &SphereGrid::new(16))?;
    let round_err = round.values.values.iter().map(|s| (s - 2.0).abs()).fold(0.0, f64::max);

    let grid = SphereGrid::new(40);
    let twist = HamiltonianFlow::new(poly("x3^2", &[(1.0, TimeProfile::Constant, [0, 0, 2])]), 1e-2)?;
    let mixed = HamiltonianFlow::new(poly("mixed", &[(1.0, TimeProfile::SinPi, [1, 0, 0]), (1.0, TimeProfile::Linear, [0, 0, 2])]), 1e-2)?;
    let base: Arc<dyn StructureSource> = Arc::new(DeformedStructure { axis: Vec3::new(0.3, -0.2, 0.6), strength: 0.8 });
    let pushed = [
        PushedStructure::new(Arc::new(RoundStructure), twist.clone(), 1.0),
        PushedStructure::new(base.clone(), mixed.clone(), 0.6),
    ];
    let mut total_err: f64 = 0.0;
    for p in &pushed {
        total_err = total_err.max((scalar_curvature(p, &grid)?.integral(&grid) - TOTAL_CURVATURE).abs());
    }

    let mut equi: f64 = 0.0;
    let probes = SphereGrid::new(6);
    for (flow, t) in [(&twist, 1.0), (&mixed, 0.6)] {
        let p = PushedStructure::new(base.clone(), flow.clone(), t);
        for x in probes.nodes() {
            let y = flow.inverse(t, x);
            equi = equi.max((curvature_at(&p, x) - curvature_at(base.as_ref(), &y)).abs());
        }
    }
    outcome(
        round_err <= 1e-4 && total_err <= 1e-3 && equi <= 1e-4,
        format!("|S(j_FS) − 2| ≤ {round_err:.1e}; |∫Sμ − 4π| ≤ {total_err:.1e} (pushed); equivariance gap {equi:.1e}"),
    )
}

fn shelukhin_checks() -> Result<Outcome> {
    let opts = ShelukhinOptions::default();
    let sh = |grid: &SphereGrid, path: &HamiltonianPath| -> Result<f64> {
        let flow = HamiltonianFlow::new(path.clone(), 1e-3)?;
        Ok(shelukhin(grid, &RoundStructure, path, &flow, opts)?.total)
    };
    let g16 = SphereGrid::new(16);
    let rotations = [
        poly("x1", &[(1.0, TimeProfile::Constant, [1, 0, 0])]),
        poly("pulse", &[(0.5, TimeProfile::Constant, [0, 0, 0]), (1.0, TimeProfile::CosPi, [0, 1, 0]), (1.0, TimeProfile::Constant, [0, 0, 1])]),
    ];
    let mut rot: f64 = 0.0;
    for r in &rotations {
        rot = rot.max(sh(&g16, r)?.abs());
    }

    let twist = poly("x3^2", &[(1.0, TimeProfile::Constant, [0, 0, 2])]);
    let refinements: Vec<f64> = [16, 24, 32].iter().map(|&d| sh(&SphereGrid::new(d), &twist)).collect::<Result<_>>()?;
    let steps: Vec<f64> = refinements.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let converged = steps.iter().all(|s| *s < 1e-4);

    let mut reparam: f64 = 0.0;
    let mixed = poly("mixed", &[(1.0, TimeProfile::SinPi, [1, 0, 0]), (1.0, TimeProfile::Linear, [0, 0, 2])]);
    for p in [&twist, &mixed] {
        let slow = HamiltonianPath::new("slow", Reparameterized::new(p.clone(), smoothstep));
        reparam = reparam.max((sh(&g16, p)? - sh(&g16, &slow)?).abs());
    }
    outcome(
        rot <= 1e-6 && converged && reparam <= 1e-6,
        format!(
            "rotations |Sh| ≤ {rot:.1e}; Sh(x₃²) on degrees 16/24/32 = {:.8}, {:.8}, {:.8} (steps {:.1e}, {:.1e}); reparameterization gap {reparam:.1e}",
            refinements[0], refinements[1], refinements[2], steps[0], steps[1]
        ),
    )
}

fn main() -> ExitCode {
    let distance = distance_checks();
    let from_distance = |indices: &[usize]| -> Result<Outcome> {
        let report = distance.as_ref().map_err(|e| preq_core::Error::Precondition(e.to_string()))?;
        let checks: Vec<_> = indices.iter().map(|&i| &report.checks[i]).collect();
        let detail: Vec<String> = checks.iter().map(|c| format!("{}: {}", c.name, c.detail)).collect();
        outcome(checks.iter().all(|c| c.passed), detail.join("; "))
    };
    type Criterion<'a> = Box<dyn FnOnce() -> Result<Outcome> + 'a>;
    let criteria: Vec<(&str, Criterion)> = vec![
        ("dimension law", Box::new(dimension_law)),
        ("unitary distance formula", Box::new(|| from_distance(&[0]))),
        ("universal-cover distance", Box::new(|| from_distance(&[1, 2]))),
        ("small-distance collapse", Box::new(|| from_distance(&[3]))),
        ("Toeplitz spectrum", Box::new(toeplitz_spectrum)),
        ("trace expansion", Box::new(trace_expansion)),
        ("phase of quantized rotations", Box::new(theorem1)),
        ("phase of a time-dependent flow", Box::new(prop53)),
        ("Toeplitz vs Kostant–Souriau propagators", Box::new(theorem2)),
        ("quasimorphism defect", Box::new(defect)),
        ("Calabi morphism", Box::new(calabi_properties)),
        ("scalar curvature", Box::new(scalar_curvature_checks)),
        ("Shelukhin invariant", Box::new(shelukhin_checks)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let (verdict, detail) = match check() {
            Ok(o) => (if o.passed { "PASS" } else { "FAIL" }, o.detail),
            Err(e) => ("FAIL", format!("error: {e}")),
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        println!("{verdict} {:>2} {name} [{:.1}s]: {detail}", i + 1, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of 13 criteria passed", 13 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
