//! Hamiltonian flows on the sphere, tangent maps in chart frames, and
//! transport of complex-structure fields.
//!
//! Tangent spaces carry the orthonormal frames `(∂_u, ∂_v)/λ` of two
//! stereographic charts. In such a frame the round complex structure
//! `v ↦ x × v` is the matrix `[[0, -1], [1, 0]]` and `ω` is `½ dx∧dy`.

use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3x2, Rotation3, Vector2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lincx::{self, LinearComplexStructure, Mat2};
use crate::sphere::{Hamiltonian, HamiltonianPath, InverseFlow, Mat3, SphereGrid, Vec3};

/// Stereographic chart. North: `z = (x₁ + i x₂)/(1 + x₃)`; South: `w = (x₁ − i x₂)/(1 − x₃)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chart {
    North,
    South,
}

/// `diag(1, −1, −1)`: swaps the two charts.
fn flip(p: &Vec3) -> Vec3 {
    Vec3::new(p[0], -p[1], -p[2])
}

impl Chart {
    pub fn for_point(p: &Vec3) -> Self {
        if p[2] >= 0.0 {
            Self::North
        } else {
            Self::South
        }
    }

    fn to_north(self, p: &Vec3) -> Vec3 {
        match self {
            Self::North => *p,
            Self::South => flip(p),
        }
    }

    pub fn coordinates(self, p: &Vec3) -> Vector2<f64> {
        let q = self.to_north(p);
        Vector2::new(q[0], q[1]) / (1.0 + q[2])
    }

    pub fn point(self, uv: &Vector2<f64>) -> Vec3 {
        let r2 = uv.norm_squared();
        let q = Vec3::new(2.0 * uv[0], 2.0 * uv[1], 1.0 - r2) / (1.0 + r2);
        self.to_north(&q)
    }

    /// Orthonormal frame `(E1, E2)` at `p`, columns of a 3×2 matrix, with `E2 = p × E1`.
    pub fn frame(self, p: &Vec3) -> Matrix3x2<f64> {
        let q = self.to_north(p);
        let s = 1.0 + q[2];
        let e1n = Vec3::new(1.0 - q[0] * q[0] / s, -q[0] * q[1] / s, -q[0]);
        let e1 = self.to_north(&e1n);
        let e2 = p.cross(&e1);
        Matrix3x2::from_columns(&[e1, e2])
    }
}

/// Frame at `p` in its default chart.
pub fn frame(p: &Vec3) -> Matrix3x2<f64> {
    Chart::for_point(p).frame(p)
}

/// Time-`t` tangent data at the nodes of a grid.
#[derive(Clone, Debug)]
pub struct FlowMap {
    pub t: f64,
    pub forward: Vec<Vec3>,
    /// `dφ_t` from the frame at the node to the frame at its image (default charts).
    pub jacobian: Vec<Mat2>,
}

impl FlowMap {
    pub fn identity(points: &[Vec3]) -> Self {
        Self { t: 0.0, forward: points.to_vec(), jacobian: vec![Mat2::identity(); points.len()] }
    }
}

/// Integrator for the flow of a Hamiltonian path with the variational equation.
#[derive(Clone, Debug)]
pub struct HamiltonianFlow {
    path: HamiltonianPath,
    max_step: f64,
}

/// One RK4 step of `x' = X_t(x)`, `M' = DX_t(x) M`, renormalizing `x`.
fn rk4_step(h: &dyn Hamiltonian, t: f64, dt: f64, x: &Vec3, m: &Mat3) -> (Vec3, Mat3) {
    let f = |t: f64, x: &Vec3, m: &Mat3| (h.vector_field(t, x), h.vector_field_jacobian(t, x) * m);
    let (k1, l1) = f(t, x, m);
    let (k2, l2) = f(t + 0.5 * dt, &(x + 0.5 * dt * k1), &(m + 0.5 * dt * l1));
    let (k3, l3) = f(t + 0.5 * dt, &(x + 0.5 * dt * k2), &(m + 0.5 * dt * l2));
    let (k4, l4) = f(t + dt, &(x + dt * k3), &(m + dt * l3));
    let x1 = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    let m1 = m + dt / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
    (x1 / x1.norm(), m1)
}

/// RK4 step for the point alone.
fn rk4_point(h: &dyn Hamiltonian, t: f64, dt: f64, x: &Vec3) -> Vec3 {
    let k1 = h.vector_field(t, x);
    let k2 = h.vector_field(t + 0.5 * dt, &(x + 0.5 * dt * k1));
    let k3 = h.vector_field(t + 0.5 * dt, &(x + 0.5 * dt * k2));
    let k4 = h.vector_field(t + dt, &(x + dt * k3));
    let x1 = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    x1 / x1.norm()
}

fn tangent_map(m: &Mat3, from: &Vec3, to: &Vec3) -> Mat2 {
    frame(to).transpose() * m * frame(from)
}

const DET_DRIFT: f64 = 1e-6;

impl HamiltonianFlow {
    pub fn new(path: HamiltonianPath, max_step: f64) -> Result<Self> {
        if !(max_step > 0.0 && max_step.is_finite()) {
            return Err(Error::StepSize(format!("flow step must be positive, got {max_step}")));
        }
        Ok(Self { path, max_step })
    }

    pub fn path(&self) -> &HamiltonianPath {
        &self.path
    }

    pub fn max_step(&self) -> f64 {
        self.max_step
    }

    /// Integrates `x` from `t0` to `t1` (either direction). Returns the endpoint and the
    /// ambient tangent map.
    pub fn transport(&self, x: &Vec3, t0: f64, t1: f64) -> (Vec3, Mat3) {
        let mut state = (*x, Mat3::identity());
        if t1 == t0 {
            return state;
        }
        let (n, dt) = self.substeps(t0, t1);
        for i in 0..n {
            state = rk4_step(&self.path, t0 + i as f64 * dt, dt, &state.0, &state.1);
        }
        state
    }

    fn substeps(&self, t0: f64, t1: f64) -> (usize, f64) {
        let n = ((t1 - t0).abs() / self.max_step).ceil().max(1.0) as usize;
        (n, (t1 - t0) / n as f64)
    }

    /// Like [`HamiltonianFlow::transport`] without the tangent map.
    pub fn transport_point(&self, x: &Vec3, t0: f64, t1: f64) -> Vec3 {
        if t1 == t0 {
            return *x;
        }
        let (n, dt) = self.substeps(t0, t1);
        (0..n).fold(*x, |y, i| rk4_point(&self.path, t0 + i as f64 * dt, dt, &y))
    }

    /// Starts a cursor that walks the flow of `points` forward in time.
    pub fn cursor(&self, points: &[Vec3]) -> FlowCursor<'_> {
        FlowCursor { flow: self, origin: points.to_vec(), states: points.iter().map(|p| (*p, Mat3::identity())).collect(), t: 0.0 }
    }

    /// `φ_t⁻¹(x)` and the frame matrix of `dφ_t⁻¹` at `x` (in `chart` at `x`, default chart at the image).
    pub fn inverse_with_tangent(&self, t: f64, x: &Vec3, chart: Chart) -> (Vec3, Mat2) {
        let (y, m) = self.transport(x, t, 0.0);
        (y, frame(&y).transpose() * m * chart.frame(x))
    }

    /// Flow maps of `points` at each of the (increasing) `times`, starting from `t = 0`.
    pub fn sample(&self, points: &[Vec3], times: &[f64]) -> Result<Vec<FlowMap>> {
        if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
            return Err(Error::Domain("flow sample times must be non-negative and increasing".into()));
        }
        let per_point: Vec<Vec<(Vec3, Mat3)>> = points
            .par_iter()
            .map(|x| {
                let mut out = Vec::with_capacity(times.len());
                let (mut y, mut m, mut t) = (*x, Mat3::identity(), 0.0);
                for &target in times {
                    let (y1, dm) = self.transport(&y, t, target);
                    m = dm * m;
                    y = y1;
                    t = target;
                    out.push((y, m));
                }
                out
            })
            .collect();
        let mut maps = Vec::with_capacity(times.len());
        for (i, &t) in times.iter().enumerate() {
            let mut forward = Vec::with_capacity(points.len());
            let mut jacobian = Vec::with_capacity(points.len());
            for (x, traj) in points.iter().zip(&per_point) {
                let (y, m) = &traj[i];
                let j = tangent_map(m, x, y);
                let drift = (j.determinant() - 1.0).abs();
                if drift > DET_DRIFT {
                    return Err(Error::Accuracy(format!(
                        "symplecticity drift {drift:.2e} at t = {t}; reduce the flow step"
                    )));
                }
                forward.push(*y);
                jacobian.push(j);
            }
            maps.push(FlowMap { t, forward, jacobian });
        }
        Ok(maps)
    }
}

impl InverseFlow for HamiltonianFlow {
    fn inverse(&self, t: f64, x: &Vec3) -> Vec3 {
        self.transport_point(x, t, 0.0)
    }
}

/// Flow of the autonomous Hamiltonian `c + a·x`: rotation about `a` by angle `−2|a|t`.
#[derive(Clone, Copy, Debug)]
pub struct RotationFlow {
    axis: Vec3,
}

impl RotationFlow {
    pub fn new(axis: Vec3) -> Self {
        Self { axis }
    }

    pub fn forward(&self, t: f64, x: &Vec3) -> Vec3 {
        Rotation3::new(-2.0 * t * self.axis) * x
    }
}

impl InverseFlow for RotationFlow {
    fn inverse(&self, t: f64, x: &Vec3) -> Vec3 {
        Rotation3::new(2.0 * t * self.axis) * x
    }
}

/// Incremental forward flow of a fixed set of points; memory stays O(points).
pub struct FlowCursor<'a> {
    flow: &'a HamiltonianFlow,
    origin: Vec<Vec3>,
    states: Vec<(Vec3, Mat3)>,
    t: f64,
}

impl FlowCursor<'_> {
    /// Advances to time `t` (not earlier than the current time) and returns the flow map there.
    pub fn advance_to(&mut self, t: f64) -> Result<FlowMap> {
        if t < self.t {
            return Err(Error::Domain(format!("cursor cannot move back from {} to {t}", self.t)));
        }
        let (flow, from) = (self.flow, self.t);
        self.states.par_iter_mut().for_each(|(y, m)| {
            let (y1, dm) = flow.transport(y, from, t);
            *m = dm * *m;
            *y = y1;
        });
        self.t = t;
        let mut forward = Vec::with_capacity(self.states.len());
        let mut jacobian = Vec::with_capacity(self.states.len());
        for (x, (y, m)) in self.origin.iter().zip(&self.states) {
            let j = tangent_map(m, x, y);
            let drift = (j.determinant() - 1.0).abs();
            if drift > DET_DRIFT {
                return Err(Error::Accuracy(format!("symplecticity drift {drift:.2e} at t = {t}; reduce the flow step")));
            }
            forward.push(*y);
            jacobian.push(j);
        }
        Ok(FlowMap { t, forward, jacobian })
    }
}

/// Flow maps of the grid nodes at `t_i = i/steps`, `i = 0..=steps`.
pub fn integrate_flow(grid: &SphereGrid, flow: &HamiltonianFlow, steps: usize) -> Result<Vec<FlowMap>> {
    if steps == 0 {
        return Err(Error::StepSize("need at least one time step".into()));
    }
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
    flow.sample(grid.nodes(), &times)
}

/// Complex structure at arbitrary points, expressed in a chosen chart frame.
pub trait StructureSource: Send + Sync {
    fn at(&self, p: &Vec3, chart: Chart) -> LinearComplexStructure;

    fn on_grid(&self, grid: &SphereGrid) -> ComplexStructureField {
        ComplexStructureField {
            values: grid.nodes().iter().map(|p| self.at(p, Chart::for_point(p))).collect(),
        }
    }
}

/// The round structure `v ↦ x × v`.
#[derive(Clone, Copy, Debug, Default)]
pub struct RoundStructure;

impl StructureSource for RoundStructure {
    fn at(&self, _p: &Vec3, _chart: Chart) -> LinearComplexStructure {
        LinearComplexStructure::standard()
    }
}

/// Structure whose metric is `g_round + ε·a♭⊗a♭` with `a` the tangential part of `axis`.
#[derive(Clone, Copy, Debug)]
pub struct DeformedStructure {
    pub axis: Vec3,
    pub strength: f64,
}

impl StructureSource for DeformedStructure {
    fn at(&self, p: &Vec3, chart: Chart) -> LinearComplexStructure {
        let a = self.axis - self.axis.dot(p) * p;
        let af = chart.frame(p).transpose() * a;
        let g = Matrix2::identity() + self.strength * af * af.transpose();
        LinearComplexStructure::from_metric(g).expect("deformed metric stays positive for strength > −1/|axis|²")
    }
}

/// `(φ_t)_* j₀` evaluated by integrating back from the query point.
pub struct PushedStructure {
    base: Arc<dyn StructureSource>,
    flow: HamiltonianFlow,
    t: f64,
}

impl PushedStructure {
    pub fn new(base: Arc<dyn StructureSource>, flow: HamiltonianFlow, t: f64) -> Self {
        Self { base, flow, t }
    }
}

impl StructureSource for PushedStructure {
    fn at(&self, p: &Vec3, chart: Chart) -> LinearComplexStructure {
        let (y, inv) = self.flow.inverse_with_tangent(self.t, p, chart);
        let j0 = self.base.at(&y, Chart::for_point(&y));
        let fwd = inv.try_inverse().expect("flow tangent maps are invertible");
        LinearComplexStructure::from_metric(lincx::omega0() * fwd * j0.matrix() * inv)
            .expect("conjugation by a symplectic map preserves compatibility")
    }
}

/// Complex structures at a list of points, each in its default chart frame.
#[derive(Clone, Debug)]
pub struct ComplexStructureField {
    pub values: Vec<LinearComplexStructure>,
}

impl ComplexStructureField {
    pub fn round(n: usize) -> Self {
        Self { values: vec![LinearComplexStructure::standard(); n] }
    }

    pub fn max_deviation(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a.distance_to(b)).fold(0.0, f64::max)
    }
}

/// `(φ_* j)(φ(x)) = dφ_x ∘ j(x) ∘ dφ_x⁻¹`; the result sits at the points `flow.forward`.
pub fn pushforward(j: &ComplexStructureField, flow: &FlowMap) -> Result<ComplexStructureField> {
    if j.values.len() != flow.jacobian.len() {
        return Err(Error::Domain("structure field and flow map have different sizes".into()));
    }
    let values = j
        .values
        .iter()
        .zip(&flow.jacobian)
        .map(|(jx, d)| {
            let inv = d.try_inverse().ok_or_else(|| Error::Accuracy("singular flow Jacobian".into()))?;
            LinearComplexStructure::from_metric(lincx::omega0() * d * jx.matrix() * inv)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComplexStructureField { values })
}

/// Nodewise geodesics between two fields at each of `ts`.
pub fn geodesic_sweep(
    j0: &ComplexStructureField,
    j1: &ComplexStructureField,
    ts: &[f64],
) -> Result<Vec<ComplexStructureField>> {
    if j0.values.len() != j1.values.len() {
        return Err(Error::Domain("structure fields have different sizes".into()));
    }
    Ok(ts
        .iter()
        .map(|&t| ComplexStructureField {
            values: j0.values.iter().zip(&j1.values).map(|(a, b)| lincx::geodesic(a, b, t)).collect(),
        })
        .collect())
}
