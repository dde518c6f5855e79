//! Schrödinger propagation in `H_k` with the lifted determinant.
//!
//! Every routine integrates `U' = −ik·G(t)·U` (or its adjoint form) with the
//! exponential midpoint rule. The lift of the determinant accumulates
//! `−k·Δt·tr G` per step, which is exact for each step's exponential.

use nalgebra::linalg::SymmetricEigen;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::flow::{frame, HamiltonianFlow};
use crate::lincx::{LinearComplexStructure, Mat2};
use crate::quantize::{chart_derivative, kostant_souriau, kostant_souriau_from_nodes, toeplitz, QuantumSpace};
use crate::sphere::{Hamiltonian, HamiltonianPath, ScalarField, SphereGrid, Vec3};
use crate::unimetric::{CMatrix, Unitary, UnitaryWithPhase};

/// Largest admissible `Δt·k·‖G‖`.
pub const MAX_STEP_PHASE: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct PropagationResult {
    pub endpoint: UnitaryWithPhase,
    /// Lifted phase after each step, starting with `0`.
    pub phase_history: Vec<f64>,
    /// `∫₀¹ tr G(t) dt` by the stepper's midpoint rule.
    pub generator_trace_integral: f64,
}

/// `exp(i·s·G)` for Hermitian `G`, with `‖G‖`.
fn exp_hermitian(g: &CMatrix, s: f64) -> (CMatrix, f64) {
    let n = g.nrows();
    let herm = (g + g.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(herm);
    let norm = eig.eigenvalues.iter().fold(0.0_f64, |a, l| a.max(l.abs()));
    let d = nalgebra::DVector::from_iterator(n, eig.eigenvalues.iter().map(|&l| Complex64::from_polar(1.0, s * l)));
    (&eig.eigenvectors * CMatrix::from_diagonal(&d) * eig.eigenvectors.adjoint(), norm)
}

/// Solves `U' = i·sign·k·G(t)·U`, `U(0) = Id`, on `[0, 1]`.
fn evolve(
    dim: usize,
    k: usize,
    steps: usize,
    sign: f64,
    constant: bool,
    mut generator: impl FnMut(f64) -> Result<CMatrix>,
) -> Result<PropagationResult> {
    if steps == 0 {
        return Err(Error::StepSize("need at least one time step".into()));
    }
    let dt = 1.0 / steps as f64;
    let kf = k as f64;
    let mut u = CMatrix::identity(dim, dim);
    let mut phase = 0.0;
    let mut trace_integral = 0.0;
    let mut history = Vec::with_capacity(steps + 1);
    history.push(0.0);
    let mut cached: Option<(CMatrix, f64, f64)> = None;
    for n in 0..steps {
        let (step, norm, trace) = match (&cached, constant) {
            (Some(c), true) => c.clone(),
            _ => {
                let g = generator((n as f64 + 0.5) * dt)?;
                let trace = g.trace().re;
                let (e, norm) = exp_hermitian(&g, sign * kf * dt);
                let entry = (e, norm, trace);
                if constant {
                    cached = Some(entry.clone());
                }
                entry
            }
        };
        if dt * kf * norm >= MAX_STEP_PHASE {
            return Err(Error::StepSize(format!(
                "Δt·k·‖G‖ = {:.3} ≥ {MAX_STEP_PHASE}; use more than {steps} steps",
                dt * kf * norm
            )));
        }
        u = step * u;
        phase += sign * kf * dt * trace;
        trace_integral += dt * trace;
        history.push(phase);
    }
    let endpoint = UnitaryWithPhase::new(Unitary::new(u)?, phase)?;
    Ok(PropagationResult { endpoint, phase_history: history, generator_trace_integral: trace_integral })
}

/// `Φ̃_k(γ)`: `U' = (k/i)·T_k(H_t)·U`.
pub fn propagate_toeplitz(
    space: &QuantumSpace,
    grid: &SphereGrid,
    path: &dyn Hamiltonian,
    steps: usize,
) -> Result<PropagationResult> {
    evolve(space.dim(), space.k(), steps, -1.0, path.is_time_independent(), |t| {
        Ok(toeplitz(space, grid, &grid.sample(|x| path.value(t, x)))?.matrix)
    })
}

/// `Φ̃_k^KS(γ)`: same with the generator `Π_k K_k(H_t) Π_k`.
pub fn propagate_ks(space: &QuantumSpace, grid: &SphereGrid, path: &dyn Hamiltonian, steps: usize) -> Result<PropagationResult> {
    evolve(space.dim(), space.k(), steps, -1.0, path.is_time_independent(), |t| {
        Ok(kostant_souriau(space, grid, path, t)?.matrix)
    })
}

/// `H_t ∘ φ_t` and `dz` of its Hamiltonian vector field `dφ_t⁻¹ X_t(φ_t x)` at the grid nodes.
fn pulled_back_symbol(path: &dyn Hamiltonian, t: f64, grid: &SphereGrid, image: &[Vec3], jac: &[Mat2]) -> (ScalarField, Vec<Complex64>) {
    let mut values = Vec::with_capacity(grid.len());
    let mut xi = Vec::with_capacity(grid.len());
    for ((x, y), d) in grid.nodes().iter().zip(image).zip(jac) {
        values.push(path.value(t, y));
        let inv = d.try_inverse().unwrap_or_else(Mat2::identity);
        let v = frame(x) * (inv * (frame(y).transpose() * path.vector_field(t, y)));
        xi.push(chart_derivative(x, &v));
    }
    (ScalarField { values }, xi)
}

/// Lift of `ξ₁`, where `(i/k)·d/dt(ξ_t⁻¹) = −Π_k K_k(H_t ∘ φ_t) Π_k·ξ_t⁻¹`.
///
/// The inverse is integrated and the endpoint inverted, phase negated.
pub fn xi_path(
    space: &QuantumSpace,
    grid: &SphereGrid,
    path: &HamiltonianPath,
    flow: &HamiltonianFlow,
    steps: usize,
) -> Result<PropagationResult> {
    if steps == 0 {
        return Err(Error::StepSize("need at least one time step".into()));
    }
    let autonomous = path.is_time_independent();
    let mut cursor = flow.cursor(grid.nodes());
    let inverse = evolve(space.dim(), space.k(), steps, 1.0, autonomous, |t| {
        if autonomous {
            // H ∘ φ_t = H for autonomous H.
            return Ok(kostant_souriau(space, grid, path, t)?.matrix);
        }
        let m = cursor.advance_to(t)?;
        let (f, xi) = pulled_back_symbol(path, t, grid, &m.forward, &m.jacobian);
        Ok(kostant_souriau_from_nodes(space, grid, &f, &xi)?.matrix)
    })?;
    Ok(PropagationResult {
        endpoint: inverse.endpoint.inverse(),
        phase_history: inverse.phase_history.iter().map(|p| -p).collect(),
        generator_trace_integral: inverse.generator_trace_integral,
    })
}

/// Largest `‖dφ_t ∘ j₀ ∘ dφ_t⁻¹ − j₀‖` over a probe grid at the given times, for `j₀` round.
pub fn holomorphy_defect(path: &HamiltonianPath, probe: &SphereGrid, max_step: f64, times: &[f64]) -> Result<f64> {
    let flow = HamiltonianFlow::new(path.clone(), max_step)?;
    let j0 = LinearComplexStructure::standard();
    let mut worst: f64 = 0.0;
    for map in flow.sample(probe.nodes(), times)? {
        for d in &map.jacobian {
            let inv = d.try_inverse().ok_or_else(|| Error::Accuracy("singular flow Jacobian".into()))?;
            worst = worst.max((d * j0.matrix() * inv - j0.matrix()).amax());
        }
    }
    Ok(worst)
}

/// `Ψ̃_k(γ)` for flows preserving the round structure; equal to the KS propagation there.
pub fn pushforward_unitary(
    space: &QuantumSpace,
    grid: &SphereGrid,
    path: &HamiltonianPath,
    steps: usize,
    max_step: f64,
) -> Result<PropagationResult> {
    let probe = SphereGrid::new(6);
    let times: Vec<f64> = (1..=4).map(|i| i as f64 / 4.0).collect();
    let defect = holomorphy_defect(path, &probe, max_step, &times)?;
    if defect > 1e-6 {
        return Err(Error::Precondition(format!(
            "flow of {} does not preserve the round structure (defect {defect:.2e})",
            path.label()
        )));
    }
    propagate_ks(space, grid, path, steps)
}

/// Steps needed so that `Δt·k·bound < MAX_STEP_PHASE / 2`.
pub fn steps_for(k: usize, generator_bound: f64, minimum: usize) -> usize {
    let needed = (2.0 * k as f64 * generator_bound / MAX_STEP_PHASE).ceil() as usize + 1;
    needed.max(minimum)
}
