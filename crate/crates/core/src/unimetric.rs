//! Operator-norm Finsler distance on `U(N)` and on its universal cover.
//!
//! On `U(N)` the distance is `max |arg λ|` over the eigenvalues of `u⁻¹v`.
//! On the universal cover, elements are pairs `(u, φ)` with `det u = e^{iφ}`,
//! and the distance becomes a small integer program: choose lifts
//! `θ_i = arg λ_i + 2π n_i` with `Σ θ_i = ψ − φ` minimizing `max |θ_i|`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

const UNITARY_TOL: f64 = 1e-10;
const PHASE_TOL: f64 = 1e-8;
const TWO_PI: f64 = 2.0 * PI;

#[derive(Clone, Debug)]
pub struct Unitary {
    u: CMatrix,
}

impl Unitary {
    pub fn new(u: CMatrix) -> Result<Self> {
        if !u.is_square() {
            return Err(Error::Domain("unitary matrix must be square".into()));
        }
        let n = u.nrows();
        let defect = (u.adjoint() * &u - CMatrix::identity(n, n)).camax();
        if defect > UNITARY_TOL {
            return Err(Error::Domain(format!("matrix is not unitary (defect {defect:.3e})")));
        }
        Ok(Self { u })
    }

    pub fn identity(n: usize) -> Self {
        Self { u: CMatrix::identity(n, n) }
    }

    /// `diag(e^{iθ_1}, …, e^{iθ_N})`.
    pub fn diagonal(angles: &[f64]) -> Self {
        let d: Vec<Complex64> = angles.iter().map(|&a| Complex64::from_polar(1.0, a)).collect();
        Self { u: CMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)) }
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.u
    }

    pub fn into_matrix(self) -> CMatrix {
        self.u
    }

    pub fn inverse(&self) -> Self {
        Self { u: self.u.adjoint() }
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        same_dim(self.dim(), other.dim())?;
        Ok(Self { u: &self.u * &other.u })
    }

    pub fn determinant(&self) -> Complex64 {
        self.u.determinant()
    }
}

/// An element `(u, φ)` of the universal cover, `det u = e^{iφ}`.
#[derive(Clone, Debug)]
pub struct UnitaryWithPhase {
    pub u: Unitary,
    pub phase: f64,
}

impl UnitaryWithPhase {
    pub fn new(u: Unitary, phase: f64) -> Result<Self> {
        let gap = (u.determinant() - Complex64::from_polar(1.0, phase)).norm();
        if !(gap <= PHASE_TOL) {
            return Err(Error::Domain(format!("det u ≠ e^(i·phase) (gap {gap:.3e})")));
        }
        Ok(Self { u, phase })
    }

    pub fn identity(n: usize) -> Self {
        Self { u: Unitary::identity(n), phase: 0.0 }
    }

    /// Group product `(u, φ)·(v, ψ) = (uv, φ + ψ)`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        Ok(Self { u: self.u.compose(&other.u)?, phase: self.phase + other.phase })
    }

    pub fn inverse(&self) -> Self {
        Self { u: self.u.inverse(), phase: -self.phase }
    }
}

/// Lattice data `θ_i ≡ base_args_i (mod 2π)`, `Σ θ_i = target_sum`.
#[derive(Clone, Debug)]
pub struct LatticeProblem {
    base_args: Vec<f64>,
    target_sum: f64,
    /// `(target_sum − Σ base_args) / 2π`.
    winding: i64,
}

impl LatticeProblem {
    pub fn new(base_args: Vec<f64>, target_sum: f64) -> Result<Self> {
        if base_args.is_empty() {
            return Err(Error::Domain("lattice problem needs at least one coordinate".into()));
        }
        if base_args.iter().any(|a| !(*a > -PI - 1e-12 && *a <= PI + 1e-12)) {
            return Err(Error::Domain("base arguments must lie in (−π, π]".into()));
        }
        let excess = (target_sum - base_args.iter().sum::<f64>()) / TWO_PI;
        let winding = excess.round();
        if !target_sum.is_finite() || (excess - winding).abs() * TWO_PI > PHASE_TOL * (1.0 + target_sum.abs()) {
            return Err(Error::Domain(format!(
                "target sum differs from Σ base args by a non-multiple of 2π ({excess:.6} turns)"
            )));
        }
        Ok(Self { base_args, target_sum, winding: winding as i64 })
    }

    pub fn base_args(&self) -> &[f64] {
        &self.base_args
    }

    pub fn target_sum(&self) -> f64 {
        self.target_sum
    }

    /// Offsets `n_i` with `Σ n_i` equal to this value are exactly the feasible ones.
    pub fn winding(&self) -> i64 {
        self.winding
    }
}

/// Principal argument in `(−π, π]`.
pub fn principal_arg(z: Complex64) -> f64 {
    let a = z.arg();
    if a <= -PI {
        PI
    } else {
        a
    }
}

fn same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Domain(format!("dimension mismatch: {a} vs {b}")));
    }
    Ok(())
}

/// Eigen-decomposition of a normal matrix: `(Q, eigenvalues)` with `Q` unitary.
///
/// Complex Schur first; its QR iteration can stall on clustered spectra
/// (e.g. `u⁻¹u`), so after a bounded number of sweeps we diagonalize the
/// Hermitian combination `α·Re m + β·Im m`, which shares the eigenvectors of `m`.
pub(crate) fn normal_eigen(m: &CMatrix) -> (CMatrix, Vec<Complex64>) {
    let n = m.nrows();
    if let Some(schur) = nalgebra::Schur::try_new(m.clone(), f64::EPSILON, 500 * n.max(1)) {
        let (q, t) = schur.unpack();
        return (q, (0..n).map(|i| t[(i, i)]).collect());
    }
    let adj = m.adjoint();
    let re = (m + &adj).scale(0.5);
    let im = (m - &adj) * Complex64::new(0.0, -0.5);
    let h = re.scale(0.754_877_666_246_692_7) + im.scale(0.569_840_290_998_053_2);
    let q = nalgebra::linalg::SymmetricEigen::new(h).eigenvectors;
    let d = q.adjoint() * m * &q;
    (q, (0..n).map(|i| d[(i, i)]).collect())
}

fn relative_args(u: &Unitary, v: &Unitary) -> Vec<f64> {
    let w = u.matrix().adjoint() * v.matrix();
    normal_eigen(&w).1.into_iter().map(principal_arg).collect()
}

/// `d(u, v) = max_i |arg λ_i(u⁻¹ v)|`.
pub fn distance(u: &Unitary, v: &Unitary) -> Result<f64> {
    same_dim(u.dim(), v.dim())?;
    Ok(relative_args(u, v).into_iter().map(f64::abs).fold(0.0, f64::max))
}

/// Feasible offset range `[lo, hi]` for one coordinate at radius `r`.
fn offset_range(b: f64, r: f64) -> (i64, i64) {
    let slack = 1e-12 * (1.0 + r);
    let lo = ((-r - slack - b) / TWO_PI).ceil() as i64;
    let hi = ((r + slack - b) / TWO_PI).floor() as i64;
    (lo, hi)
}

fn feasible(p: &LatticeProblem, r: f64) -> Option<Vec<(i64, i64)>> {
    let ranges: Vec<_> = p.base_args.iter().map(|&b| offset_range(b, r)).collect();
    if ranges.iter().any(|(lo, hi)| lo > hi) {
        return None;
    }
    let lo: i64 = ranges.iter().map(|r| r.0).sum();
    let hi: i64 = ranges.iter().map(|r| r.1).sum();
    (lo <= p.winding && p.winding <= hi).then_some(ranges)
}

/// Exact minimizer of `max |θ_i|` over the lattice coset.
///
/// The optimal value is one of the finitely many `|b_i + 2πn|`; feasibility at a
/// radius is monotone, so a binary search over the sorted candidates finds it.
pub fn solve_lattice(p: &LatticeProblem) -> (f64, Vec<f64>) {
    let reach = offset_reach(p);
    let mut candidates: Vec<f64> = p
        .base_args
        .iter()
        .flat_map(|&b| (-reach..=reach).map(move |k| (b + TWO_PI * k as f64).abs()))
        .collect();
    candidates.sort_by(|a, b| a.total_cmp(b));
    candidates.dedup();

    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(p, candidates[mid]).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let ranges = feasible(p, candidates[lo]).expect("largest candidate radius is always feasible");

    let mut offsets: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    let mut missing = p.winding - offsets.iter().sum::<i64>();
    for (o, r) in offsets.iter_mut().zip(&ranges) {
        let step = missing.min(r.1 - *o);
        *o += step;
        missing -= step;
    }
    let theta: Vec<f64> = p.base_args.iter().zip(&offsets).map(|(b, &k)| b + TWO_PI * k as f64).collect();
    let m = theta.iter().map(|t| t.abs()).fold(0.0, f64::max);
    (m, theta)
}

/// `|n_i| ≤` this bound for every offset of an optimal lattice point.
fn offset_reach(p: &LatticeProblem) -> i64 {
    let n = p.base_args.len() as f64;
    // Optimal radius ≤ |target|/N + 2π, so |b + 2πn| ≤ that gives |n| ≤ (radius + π)/2π.
    ((p.target_sum.abs() / n + 3.0 * PI) / TWO_PI).ceil() as i64 + 1
}

/// Minimum of `max |θ_i|` by enumerating every offset vector within the a priori reach.
///
/// Cost is `(2·reach + 1)^(N−1)`; meant as an oracle for small `N`.
pub fn solve_lattice_exhaustive(p: &LatticeProblem) -> f64 {
    let span = offset_reach(p);
    let n = p.base_args.len();
    let mut best = f64::INFINITY;
    let mut offsets = vec![-span; n - 1];
    loop {
        let last = p.winding - offsets.iter().sum::<i64>();
        let value = offsets
            .iter()
            .chain(std::iter::once(&last))
            .zip(&p.base_args)
            .map(|(&k, b)| (b + TWO_PI * k as f64).abs())
            .fold(0.0, f64::max);
        best = best.min(value);
        let mut i = 0;
        loop {
            if i == n - 1 {
                return best;
            }
            offsets[i] += 1;
            if offsets[i] <= span {
                break;
            }
            offsets[i] = -span;
            i += 1;
        }
    }
}

/// The lattice problem whose optimum is `d̃(a, b)`.
pub fn cover_lattice(a: &UnitaryWithPhase, b: &UnitaryWithPhase) -> Result<LatticeProblem> {
    Ok(cover_problem(a, b)?.1)
}

fn cover_problem(a: &UnitaryWithPhase, b: &UnitaryWithPhase) -> Result<(CMatrix, LatticeProblem)> {
    same_dim(a.u.dim(), b.u.dim())?;
    // e^{iH} u = v, so H diagonalizes with v u⁻¹, which is similar to u⁻¹ v.
    let w = b.u.matrix() * a.u.matrix().adjoint();
    let (q, eig) = normal_eigen(&w);
    let args = eig.into_iter().map(principal_arg).collect();
    Ok((q, LatticeProblem::new(args, b.phase - a.phase)?))
}

/// `d̃((u, φ), (v, ψ))`.
pub fn cover_distance(a: &UnitaryWithPhase, b: &UnitaryWithPhase) -> Result<f64> {
    let (_, problem) = cover_problem(a, b)?;
    Ok(solve_lattice(&problem).0)
}

/// Hermitian `H` with `e^{iH} u = v`, `tr H = ψ − φ` and `‖H‖ = d̃(a, b)`.
pub fn minimizing_curve(a: &UnitaryWithPhase, b: &UnitaryWithPhase) -> Result<CMatrix> {
    let (q, problem) = cover_problem(a, b)?;
    let (_, theta) = solve_lattice(&problem);
    let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        theta.len(),
        theta.into_iter().map(|t| Complex64::new(t, 0.0)),
    ));
    let h = &q * d * q.adjoint();
    Ok((&h + h.adjoint()).scale(0.5))
}

/// `exp(iH)` for Hermitian `H`.
pub fn exp_i_hermitian(h: &CMatrix) -> CMatrix {
    let n = h.nrows();
    let eig = nalgebra::linalg::SymmetricEigen::new(h.clone());
    let phases = nalgebra::DVector::from_iterator(n, eig.eigenvalues.iter().map(|&l| Complex64::from_polar(1.0, l)));
    &eig.eigenvectors * CMatrix::from_diagonal(&phases) * eig.eigenvectors.adjoint()
}

/// Lifts the endpoint of a sampled path in `U(N)` to the universal cover.
///
/// Each step contributes `Σ arg λ_i(u_k⁻¹ u_{k+1})`, which is the exact phase
/// increment along the minimizing segment provided every `|arg λ_i| < π/2`.
pub fn lift_path(path: &[Unitary], start_phase: f64) -> Result<UnitaryWithPhase> {
    let first = path.first().ok_or_else(|| Error::Domain("empty path".into()))?;
    let mut phase = start_phase;
    for (i, w) in path.windows(2).enumerate() {
        same_dim(w[0].dim(), w[1].dim())?;
        let args = relative_args(&w[0], &w[1]);
        let worst = args.iter().map(|a| a.abs()).fold(0.0, f64::max);
        if worst >= PI / 2.0 {
            return Err(Error::StepSize(format!(
                "samples {i} and {} are {worst:.3} apart; need < π/2",
                i + 1
            )));
        }
        phase += args.iter().sum::<f64>();
    }
    let _ = first;
    UnitaryWithPhase::new(path.last().unwrap().clone(), phase)
}

/// Haar-distributed random unitary (QR of a complex Gaussian matrix with phase fix).
pub fn random_unitary<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Unitary {
    use rand_distr::{Distribution, StandardNormal};
    let z = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im) / 2f64.sqrt()
    });
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    Unitary { u: q }
}

/// A random cover element over a random unitary, phase lifted by `winding` turns.
pub fn random_cover_element<R: rand::Rng + ?Sized>(n: usize, winding: i64, rng: &mut R) -> UnitaryWithPhase {
    let u = random_unitary(n, rng);
    let phase = principal_arg(u.determinant()) + TWO_PI * winding as f64;
    UnitaryWithPhase { u, phase }
}

/// Operator 2-norm (largest singular value).
pub fn operator_norm(m: &CMatrix) -> f64 {
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}
