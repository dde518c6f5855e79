//! Hermitian scalar curvature, the Shelukhin quasimorphism and the
//! homomorphism defect of the quantum propagators.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{Chart, HamiltonianFlow, StructureSource};
use crate::lincx::{self, LinearComplexStructure, SiegelLoop};
use crate::propagate::propagate_toeplitz;
use crate::quantize::QuantumSpace;
use crate::sphere::{integrate, star_product, InverseFlow, unit_interval_rule, Hamiltonian, HamiltonianPath, ScalarField, SphereGrid, Vec3};
use crate::unimetric::cover_distance;

/// `∫ S μ` forced by Chern–Weil: `2π·c₁(TM)`.
pub const TOTAL_CURVATURE: f64 = 4.0 * PI;
const TOTAL_CURVATURE_TOL: f64 = 1e-3;

/// Stencil spacing in chart coordinates.
const STENCIL: f64 = 3e-3;

#[derive(Clone, Debug)]
pub struct CurvatureField {
    pub values: ScalarField,
}

impl CurvatureField {
    pub fn integral(&self, grid: &SphereGrid) -> f64 {
        integrate(grid, &self.values)
    }
}

/// Metric `ω(·, j·)` in chart coordinates: `(λ²/2)·Ω j` with `λ = 2/(1 + |uv|²)`.
fn chart_metric(source: &dyn StructureSource, chart: Chart, uv: &Vector2<f64>) -> [f64; 3] {
    let p = chart.point(uv);
    let j = source.at(&p, chart);
    let lambda = 2.0 / (1.0 + uv.norm_squared());
    let g = lincx::omega0() * j.matrix() * (0.5 * lambda * lambda);
    [g[(0, 0)], 0.5 * (g[(0, 1)] + g[(1, 0)]), g[(1, 1)]]
}

/// Gauss curvature of `ω(·, j·)` at `p`, by the Brioschi formula on a 5×5 stencil.
pub fn curvature_at(source: &dyn StructureSource, p: &Vec3) -> f64 {
    let chart = Chart::for_point(p);
    let c = chart.coordinates(p);
    let h = STENCIL;
    let mut e = [[0.0; 5]; 5];
    let mut f = [[0.0; 5]; 5];
    let mut g = [[0.0; 5]; 5];
    for a in 0..5 {
        for b in 0..5 {
            let uv = c + Vector2::new((a as f64 - 2.0) * h, (b as f64 - 2.0) * h);
            let [ee, ff, gg] = chart_metric(source, chart, &uv);
            e[a][b] = ee;
            f[a][b] = ff;
            g[a][b] = gg;
        }
    }
    // Fourth-order central weights.
    const D1: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
    const D2: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
    let du = |m: &[[f64; 5]; 5]| (0..5).map(|a| D1[a] * m[a][2]).sum::<f64>() / (12.0 * h);
    let dv = |m: &[[f64; 5]; 5]| (0..5).map(|b| D1[b] * m[2][b]).sum::<f64>() / (12.0 * h);
    let duu = |m: &[[f64; 5]; 5]| (0..5).map(|a| D2[a] * m[a][2]).sum::<f64>() / (12.0 * h * h);
    let dvv = |m: &[[f64; 5]; 5]| (0..5).map(|b| D2[b] * m[2][b]).sum::<f64>() / (12.0 * h * h);
    let duv = |m: &[[f64; 5]; 5]| {
        let mut s = 0.0;
        for a in 0..5 {
            for b in 0..5 {
                s += D1[a] * D1[b] * m[a][b];
            }
        }
        s / (144.0 * h * h)
    };
    let (e0, f0, g0) = (e[2][2], f[2][2], g[2][2]);
    let a = Matrix3::new(
        -0.5 * dvv(&e) + duv(&f) - 0.5 * duu(&g),
        0.5 * du(&e),
        du(&f) - 0.5 * dv(&e),
        dv(&f) - 0.5 * du(&g),
        e0,
        f0,
        0.5 * dv(&g),
        f0,
        g0,
    );
    let b = Matrix3::new(0.0, 0.5 * dv(&e), 0.5 * du(&g), 0.5 * dv(&e), e0, f0, 0.5 * du(&g), f0, g0);
    let det = e0 * g0 - f0 * f0;
    (a.determinant() - b.determinant()) / (det * det)
}

/// `S(j)` at the grid nodes; errors when `∫ S μ` misses `4π` by more than `1e−3`.
pub fn scalar_curvature(source: &dyn StructureSource, grid: &SphereGrid) -> Result<CurvatureField> {
    let values: Vec<f64> = grid.nodes().par_iter().map(|p| curvature_at(source, p)).collect();
    let field = CurvatureField { values: ScalarField::new(values)? };
    let total = field.integral(grid);
    if (total - TOTAL_CURVATURE).abs() > TOTAL_CURVATURE_TOL {
        return Err(Error::Accuracy(format!(
            "∫ S μ = {total:.6} instead of 4π; the grid (degree {}) is too coarse for this structure",
            grid.degree()
        )));
    }
    Ok(field)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShelukhinValue {
    pub disc_term: f64,
    pub curvature_term: f64,
    pub total: f64,
}

/// Discretization of the two integrals in the quasimorphism.
#[derive(Clone, Copy, Debug)]
pub struct ShelukhinOptions {
    /// Samples of `t ↦ j_t(x)` per node (a multiple of 4, for two Richardson steps).
    pub loop_samples: usize,
    /// Gauss–Legendre nodes in time for the curvature term.
    pub time_nodes: usize,
}

impl Default for ShelukhinOptions {
    fn default() -> Self {
        Self { loop_samples: 64, time_nodes: 8 }
    }
}

fn structure_along_flow(j0: &dyn StructureSource, flow: &HamiltonianFlow, t: f64, x: &Vec3) -> LinearComplexStructure {
    let chart = Chart::for_point(x);
    let (y, inv) = flow.inverse_with_tangent(t, x, chart);
    let base = j0.at(&y, Chart::for_point(&y));
    let fwd = inv.try_inverse().expect("flow tangent maps are invertible");
    LinearComplexStructure::from_metric(lincx::omega0() * fwd * base.matrix() * inv).expect("symplectic conjugation preserves compatibility")
}

/// `∫_D σ` for the loop `t ↦ j_t(x)` closed by the geodesic back to `j₀(x)`.
fn disc_area(j0: &dyn StructureSource, flow: &HamiltonianFlow, x: &Vec3, samples: usize) -> Result<f64> {
    let fine: Vec<LinearComplexStructure> =
        (0..=samples).map(|i| structure_along_flow(j0, flow, i as f64 / samples as f64, x)).collect();
    let area = |stride: usize| -> Result<f64> {
        let mut pts: Vec<LinearComplexStructure> = fine.iter().step_by(stride).copied().collect();
        pts.push(fine[0]);
        Ok(lincx::loop_area(&SiegelLoop::new(pts, lincx::Orientation::Forward)?))
    };
    // Inscribed geodesic polygons miss the curve's area by a series in h²; two Romberg levels.
    let (a1, a2, a4) = (area(1)?, area(2)?, area(4)?);
    let r1 = (4.0 * a1 - a2) / 3.0;
    let r2 = (4.0 * a2 - a4) / 3.0;
    Ok((16.0 * r1 - r2) / 15.0)
}

/// `Sh_{j₀}(γ) = ∫_M ∫_{D_x} σ μ(x) + ∫₀¹ ∫_M S(j_t) H̄_t μ dt` with `H̄_t` normalized.
pub fn shelukhin(
    grid: &SphereGrid,
    j0: &dyn StructureSource,
    path: &HamiltonianPath,
    flow: &HamiltonianFlow,
    options: ShelukhinOptions,
) -> Result<ShelukhinValue> {
    if options.loop_samples < 4 || !options.loop_samples.is_multiple_of(4) {
        return Err(Error::Domain("loop samples must be a positive multiple of 4".into()));
    }
    let areas: Vec<f64> = grid
        .nodes()
        .par_iter()
        .map(|x| disc_area(j0, flow, x, options.loop_samples))
        .collect::<Result<_>>()?;
    let disc_term = integrate(grid, &ScalarField { values: areas });

    let curvature_term = curvature_term(grid, j0, path, flow, options.time_nodes)?;
    Ok(ShelukhinValue { disc_term, curvature_term, total: disc_term + curvature_term })
}

/// `∫₀¹ ∫_M S(j_t) H̄_t μ dt` with `j_t = (φ_t)_* j₀` and `H̄_t` the normalized Hamiltonian.
pub fn curvature_term(
    grid: &SphereGrid,
    j0: &dyn StructureSource,
    path: &dyn Hamiltonian,
    flow: &HamiltonianFlow,
    time_nodes: usize,
) -> Result<f64> {
    // S(j_t)(x) = S(j₀)(φ_t⁻¹ x): substitute x = φ_t(y).
    let s0 = scalar_curvature(j0, grid)?;
    let rule = unit_interval_rule(time_nodes);
    let times: Vec<f64> = rule.iter().map(|(t, _)| *t).collect();
    let maps = flow.sample(grid.nodes(), &times)?;
    let volume: f64 = grid.weights().iter().sum();
    let mut total = 0.0;
    for ((t, w), map) in rule.iter().zip(&maps) {
        let mean = integrate(grid, &grid.sample(|x| path.value(*t, x))) / volume;
        let weighted: f64 = map
            .forward
            .iter()
            .zip(&s0.values.values)
            .zip(grid.weights())
            .map(|((y, s), mu)| s * (path.value(*t, y) - mean) * mu)
            .sum();
        total += w * weighted;
    }
    Ok(total)
}

/// `d̃(Φ̃_k(A)·Φ̃_k(B), Φ̃_k(A ⋆ B))` for one quantum space; `flow_of_a` is the flow generated by `a`.
pub fn defect(
    space: &QuantumSpace,
    grid: &SphereGrid,
    a: &HamiltonianPath,
    b: &HamiltonianPath,
    flow_of_a: Arc<dyn InverseFlow>,
    steps: usize,
) -> Result<f64> {
    let product = star_product(a, b, flow_of_a);
    let pa = propagate_toeplitz(space, grid, a, steps)?;
    let pb = propagate_toeplitz(space, grid, b, steps)?;
    let pab = propagate_toeplitz(space, grid, &product, steps)?;
    cover_distance(&pa.endpoint.compose(&pb.endpoint)?, &pab.endpoint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{DeformedStructure, PushedStructure, RotationFlow, RoundStructure};
    use crate::quantize::grid_degree_for;
    use crate::sphere::{smoothstep, Polynomial, Reparameterized, Term, TimeProfile};
    use approx::assert_abs_diff_eq;

    fn path(label: &str, terms: Vec<Term>) -> HamiltonianPath {
        HamiltonianPath::new(label, Polynomial::new(terms))
    }

    fn squeeze() -> HamiltonianPath {
        path("x3^2", vec![Term::new(1.0, TimeProfile::Constant, [0, 0, 2])])
    }

    #[test]
    fn round_sphere_has_curvature_two() {
        let grid = SphereGrid::new(10);
        let s = scalar_curvature(&RoundStructure, &grid).unwrap();
        assert!(s.values.values.iter().all(|v| (v - 2.0).abs() < 1e-4));
        assert_abs_diff_eq!(s.integral(&grid), TOTAL_CURVATURE, epsilon = 1e-6);
    }

    #[test]
    fn total_curvature_is_topological() {
        let grid = SphereGrid::new(40);
        let deformed = DeformedStructure { axis: Vec3::new(0.2, -0.4, 0.7), strength: 1.2 };
        let s = scalar_curvature(&deformed, &grid).unwrap();
        assert_abs_diff_eq!(s.integral(&grid), TOTAL_CURVATURE, epsilon = 1e-3);
        assert!(s.values.values.iter().any(|v| (v - 2.0).abs() > 1e-2));
    }

    #[test]
    fn curvature_is_equivariant() {
        let base: Arc<dyn StructureSource> = Arc::new(DeformedStructure { axis: Vec3::new(0.5, 0.0, 0.5), strength: 0.6 });
        let flow = HamiltonianFlow::new(squeeze(), 1e-3).unwrap();
        let pushed = PushedStructure::new(base.clone(), flow.clone(), 0.7);
        for x in [Vec3::new(0.3, 0.4, 0.5), Vec3::new(-0.8, 0.1, -0.2), Vec3::new(0.0, -0.3, 0.9)] {
            let x = x.normalize();
            let y = flow.inverse(0.7, &x);
            assert_abs_diff_eq!(curvature_at(&pushed, &x), curvature_at(base.as_ref(), &y), epsilon = 1e-4);
        }
    }

    #[test]
    fn coarse_grid_is_reported() {
        let deformed = DeformedStructure { axis: Vec3::new(0.0, 0.0, 1.5), strength: 3.0 };
        assert!(matches!(scalar_curvature(&deformed, &SphereGrid::new(4)), Err(Error::Accuracy(_))));
    }

    #[test]
    fn shelukhin_vanishes_on_rotations_and_identity() {
        let grid = SphereGrid::new(8);
        let opts = ShelukhinOptions { loop_samples: 8, time_nodes: 4 };
        for h in [
            path("x1", vec![Term::new(1.0, TimeProfile::Constant, [1, 0, 0])]),
            path("mix", vec![Term::new(0.5, TimeProfile::SinPi, [0, 1, 0]), Term::new(1.0, TimeProfile::Linear, [0, 0, 1])]),
            path("zero", vec![]),
        ] {
            let flow = HamiltonianFlow::new(h.clone(), 1e-2).unwrap();
            let sh = shelukhin(&grid, &RoundStructure, &h, &flow, opts).unwrap();
            assert!(sh.disc_term.abs() < 1e-8, "{sh:?}");
            assert!(sh.total.abs() < 1e-6, "{sh:?}");
        }
    }

    #[test]
    fn shelukhin_is_reparameterization_invariant() {
        let grid = SphereGrid::new(12);
        let opts = ShelukhinOptions { loop_samples: 64, time_nodes: 8 };
        let h = squeeze();
        let slow = HamiltonianPath::new("slow", Reparameterized::new(h.clone(), smoothstep));
        let a = shelukhin(&grid, &RoundStructure, &h, &HamiltonianFlow::new(h.clone(), 2e-3).unwrap(), opts).unwrap();
        let b = shelukhin(&grid, &RoundStructure, &slow, &HamiltonianFlow::new(slow.clone(), 2e-3).unwrap(), opts).unwrap();
        assert!(a.total.abs() > 1e-3);
        assert_abs_diff_eq!(a.total, b.total, epsilon = 1e-6);
    }

    #[test]
    fn defect_vanishes_for_trivial_and_commuting_pairs() {
        let k = 6;
        let space = QuantumSpace::new(k).unwrap();
        let grid = SphereGrid::new(grid_degree_for(k, 4));
        let a = path("x3", vec![Term::new(1.0, TimeProfile::Constant, [0, 0, 1])]);
        let zero = path("zero", vec![]);
        let flow: Arc<dyn InverseFlow> = Arc::new(RotationFlow::new(Vec3::z()));
        assert!(defect(&space, &grid, &a, &zero, flow.clone(), 64).unwrap() < 1e-9);
        let b = path("2x3", vec![Term::new(2.0, TimeProfile::Constant, [0, 0, 1])]);
        assert!(defect(&space, &grid, &a, &b, flow.clone(), 64).unwrap() < 1e-6);
        let numeric: Arc<dyn InverseFlow> = Arc::new(HamiltonianFlow::new(a.clone(), 1e-2).unwrap());
        assert!(defect(&space, &grid, &a, &b, numeric, 64).unwrap() < 1e-6);
    }
}
