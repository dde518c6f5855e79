//! Holomorphic sections of `O(k)` over `CP¹` and their quantum operators.
//!
//! Basis: `z^m`, `m = 0..=k`, in the north chart with fiber metric
//! `|e|² = (1 + |z|²)^{-k}`. With `ρ = (1 − x₃)/2 = |z|²/(1 + |z|²)` one has
//! `|z^m|² = ρ^m (1 − ρ)^{k−m}` pointwise and `μ = dρ dφ`, so the squared
//! norms are `2π·m!(k−m)!/(k+1)!`.
//!
//! Matrix elements are integrated ring by ring: an FFT over the azimuth picks
//! out the Fourier mode that the selection rule `e^{i(m−n)φ}` asks for.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::sphere::{gauss_legendre, integrate, Hamiltonian, ScalarField, SphereGrid, Vec3};
use crate::unimetric::CMatrix;

/// `ln n!`
fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// `H_k = H⁰(CP¹, O(k))` with its monomial basis.
#[derive(Clone, Debug)]
pub struct QuantumSpace {
    k: usize,
    norms: Vec<f64>,
    ln_norms: Vec<f64>,
}

impl QuantumSpace {
    /// Squared norms by Gauss–Legendre in `ρ`, checked against the Beta-function closed form.
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Domain("tensor power k must be at least 1".into()));
        }
        let (x, w) = gauss_legendre(k / 2 + 1);
        let mut norms = Vec::with_capacity(k + 1);
        let mut ln_norms = Vec::with_capacity(k + 1);
        for m in 0..=k {
            let quad: f64 = x
                .iter()
                .zip(&w)
                .map(|(&x, &w)| {
                    let rho = 0.5 * (1.0 - x);
                    0.5 * w * ((m as f64) * rho.ln() + ((k - m) as f64) * (1.0 - rho).ln()).exp()
                })
                .sum::<f64>()
                * 2.0
                * PI;
            let ln_exact = (2.0 * PI).ln() + ln_factorial(m) + ln_factorial(k - m) - ln_factorial(k + 1);
            let rel = (quad.ln() - ln_exact).abs();
            if !(rel < 1e-10) {
                return Err(Error::Accuracy(format!("norm of z^{m} off by {rel:.2e} (relative) at k = {k}")));
            }
            norms.push(quad);
            ln_norms.push(ln_exact);
        }
        Ok(Self { k, norms, ln_norms })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.norms.len()
    }

    /// `‖z^m‖²`, `m = 0..=k`.
    pub fn basis_norms(&self) -> &[f64] {
        &self.norms
    }

    /// `|z^m| / ‖z^m‖` at `ρ`.
    fn amplitude(&self, m: usize, rho: f64) -> f64 {
        let k = self.k as f64;
        let m_ = m as f64;
        (0.5 * (m_ * rho.ln() + (k - m_) * (1.0 - rho).ln() - self.ln_norms[m])).exp()
    }

    /// Radial factor of `⟨∇ z^m, ·⟩ / ‖z^m‖`, namely `|z|^{m−1}(1−ρ)^{k/2}·(m − kρ)/‖z^m‖`.
    fn derivative_amplitude(&self, m: usize, rho: f64) -> f64 {
        let k = self.k as f64;
        let m_ = m as f64;
        let radial = 0.5 * ((m_ - 1.0) * rho.ln() + (k - m_ + 1.0) * (1.0 - rho).ln() - self.ln_norms[m]);
        radial.exp() * (m_ - k * rho)
    }
}

/// `dim H_k = k + 1`.
pub fn dimension(k: usize) -> usize {
    k + 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    Toeplitz,
    KostantSouriau,
}

/// A matrix in the orthonormalized monomial basis; entry `(n, m)` is `⟨A e_m, e_n⟩`.
#[derive(Clone, Debug)]
pub struct QuantumOperator {
    pub matrix: CMatrix,
    pub kind: OperatorKind,
    pub k: usize,
}

impl QuantumOperator {
    pub fn hermitian_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).camax()
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }
}

/// Azimuthal spectra `F_r(q) = w_r Σ_l g_l e^{−iqφ_l}` of a nodal function, ring by ring.
fn ring_spectra(grid: &SphereGrid, values: &[Complex64], fft: &Arc<dyn Fft<f64>>) -> Vec<Vec<Complex64>> {
    let n = grid.n_phi();
    grid.rings()
        .iter()
        .enumerate()
        .map(|(r, ring)| {
            let mut buf: Vec<Complex64> = values[r * n..(r + 1) * n].to_vec();
            fft.process(&mut buf);
            buf.iter_mut().for_each(|c| *c *= ring.node_weight);
            buf
        })
        .collect()
}

fn mode(spectrum: &[Complex64], q: i64) -> Complex64 {
    let n = spectrum.len() as i64;
    spectrum[q.rem_euclid(n) as usize]
}

fn check_resolution(space: &QuantumSpace, grid: &SphereGrid) -> Result<()> {
    if grid.degree() < 2 * space.k + 2 {
        return Err(Error::Precondition(format!(
            "grid degree {} cannot resolve k = {} (need ≥ 2k + 2)",
            grid.degree(),
            space.k
        )));
    }
    Ok(())
}

fn planner(grid: &SphereGrid) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_forward(grid.n_phi())
}

/// `Σ_r a_n(ρ_r) b_m(ρ_r) F_r(n + shift − m)` for all `(n, m)`.
fn assemble(
    space: &QuantumSpace,
    grid: &SphereGrid,
    spectra: &[Vec<Complex64>],
    shift: i64,
    left: impl Fn(usize, f64) -> f64,
    right: impl Fn(usize, f64) -> f64,
) -> CMatrix {
    let dim = space.dim();
    let mut out = CMatrix::zeros(dim, dim);
    for (ring, spectrum) in grid.rings().iter().zip(spectra) {
        let rho = 0.5 * (1.0 - ring.height);
        let a: Vec<f64> = (0..dim).map(|n| left(n, rho)).collect();
        let b: Vec<f64> = (0..dim).map(|m| right(m, rho)).collect();
        for m in 0..dim {
            for n in 0..dim {
                out[(n, m)] += mode(spectrum, n as i64 + shift - m as i64) * (a[n] * b[m]);
            }
        }
    }
    out
}

/// `T_k(f)`: compression of multiplication by `f` to `H_k`.
pub fn toeplitz(space: &QuantumSpace, grid: &SphereGrid, f: &ScalarField) -> Result<QuantumOperator> {
    check_resolution(space, grid)?;
    let fft = planner(grid);
    let values: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let spectra = ring_spectra(grid, &values, &fft);
    let matrix = assemble(space, grid, &spectra, 0, |n, r| space.amplitude(n, r), |m, r| space.amplitude(m, r));
    Ok(QuantumOperator { matrix, kind: OperatorKind::Toeplitz, k: space.k })
}

/// `dz(X)` in the north chart for a tangent vector `X` at `x`.
pub fn chart_derivative(x: &Vec3, v: &Vec3) -> Complex64 {
    let s = 1.0 + x[2];
    Complex64::new(v[0], v[1]) / s - Complex64::new(x[0], x[1]) * v[2] / (s * s)
}

/// `Π_k K_k(f) Π_k` from the nodal values of `f` and of `dz(X_f)`.
///
/// `∇_X(z^m e^k) = dz(X)·z^{m−1}(m − kρ)·e^k` for the Chern connection of
/// `(1 + |z|²)^{−k}`, and `K_k(f) = f + (1/ik)∇_X`.
pub fn kostant_souriau_from_nodes(
    space: &QuantumSpace,
    grid: &SphereGrid,
    f: &ScalarField,
    xi: &[Complex64],
) -> Result<QuantumOperator> {
    let mut t = toeplitz(space, grid, f)?;
    let fft = planner(grid);
    let spectra = ring_spectra(grid, xi, &fft);
    let d = assemble(space, grid, &spectra, 1, |n, r| space.amplitude(n, r), |m, r| space.derivative_amplitude(m, r));
    let k = space.k as f64;
    t.matrix -= d * Complex64::new(0.0, 1.0 / k);
    t.kind = OperatorKind::KostantSouriau;
    Ok(t)
}

/// `Π_k K_k(H_t) Π_k`.
pub fn kostant_souriau(space: &QuantumSpace, grid: &SphereGrid, h: &dyn Hamiltonian, t: f64) -> Result<QuantumOperator> {
    let f = grid.sample(|x| h.value(t, x));
    let xi: Vec<Complex64> = grid.nodes().iter().map(|x| chart_derivative(x, &h.vector_field(t, x))).collect();
    kostant_souriau_from_nodes(space, grid, &f, &xi)
}

/// `λ' = (n/2)·∫ρ / ∫ω` with `n = 1`, `∫ρ = 2π·c₁(TM) = 4π` and `∫ω = 2π·c₁(L) = 2π`.
pub fn lambda_prime() -> f64 {
    let chern_tangent = 2.0;
    let chern_line = 1.0;
    0.5 * (2.0 * PI * chern_tangent) / (2.0 * PI * chern_line)
}

/// `tr Π K_k(f) Π − (k/2π)[(1 + λ'/k)∫fμ + (1/2k)∫ f̄ S μ]`.
pub fn trace_expansion_residual(
    grid: &SphereGrid,
    ks: &QuantumOperator,
    f: &ScalarField,
    curvature: &ScalarField,
) -> f64 {
    let k = ks.k as f64;
    let integral = integrate(grid, f);
    let mean = integral / grid.weights().iter().sum::<f64>();
    let weighted = ScalarField { values: f.values.iter().zip(&curvature.values).map(|(v, s)| (v - mean) * s).collect() };
    let expansion = k / (2.0 * PI) * ((1.0 + lambda_prime() / k) * integral + integrate(grid, &weighted) / (2.0 * k));
    ks.trace().re - expansion
}

/// Builds `Π K_k(h) Π` for `h` at `t = 0` and returns the trace-expansion residual.
pub fn trace_expansion_check(
    space: &QuantumSpace,
    grid: &SphereGrid,
    h: &dyn Hamiltonian,
    curvature: &ScalarField,
) -> Result<f64> {
    let ks = kostant_souriau(space, grid, h, 0.0)?;
    Ok(trace_expansion_residual(grid, &ks, &grid.sample(|x| h.value(0.0, x)), curvature))
}

/// Smallest grid degree that resolves `H_k` together with a symbol of degree `symbol_degree`.
pub fn grid_degree_for(k: usize, symbol_degree: usize) -> usize {
    2 * k + symbol_degree + 2
}

/// Matrix as rows of `(re, im)` pairs, for export.
pub fn matrix_rows(m: &DMatrix<Complex64>) -> Vec<Vec<(f64, f64)>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| (m[(i, j)].re, m[(i, j)].im)).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{Polynomial, Term, TimeProfile};
    use approx::assert_abs_diff_eq;

    fn monomial(c: f64, p: [u32; 3]) -> Term {
        Term::new(c, TimeProfile::Constant, p)
    }

    fn setup(k: usize, extra: usize) -> (QuantumSpace, SphereGrid) {
        (QuantumSpace::new(k).unwrap(), SphereGrid::new(grid_degree_for(k, extra)))
    }

    fn eigenvalues(m: &CMatrix) -> Vec<f64> {
        let mut e: Vec<f64> = nalgebra::linalg::SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
        e.sort_by(|a, b| a.total_cmp(b));
        e
    }

    #[test]
    fn dimensions_and_norms() {
        assert_eq!(QuantumSpace::new(1).unwrap().dim(), 2);
        assert_eq!(QuantumSpace::new(10).unwrap().dim(), 11);
        let s = QuantumSpace::new(9).unwrap();
        for m in 0..=9usize {
            // B(m+1, k−m+1)/B(1, k+1) = m!(k−m)!/k!
            let ratio = (ln_factorial(m) + ln_factorial(9 - m) - ln_factorial(9)).exp();
            assert_abs_diff_eq!(s.basis_norms()[m] / s.basis_norms()[0], ratio, epsilon = 1e-12 * ratio.max(1.0));
        }
        assert!(QuantumSpace::new(0).is_err());
    }

    #[test]
    fn toeplitz_of_constants_and_height() {
        let (space, grid) = setup(12, 1);
        let one = toeplitz(&space, &grid, &grid.sample(|_| 1.0)).unwrap();
        assert!((&one.matrix - CMatrix::identity(13, 13)).camax() < 1e-12);
        let z = toeplitz(&space, &grid, &grid.sample(|x| x[2])).unwrap();
        for n in 0..=12 {
            for m in 0..=12 {
                let expected = if n == m { (12.0 - 2.0 * m as f64) / 14.0 } else { 0.0 };
                assert_abs_diff_eq!(z.matrix[(n, m)].re, expected, epsilon = 1e-12);
                assert_abs_diff_eq!(z.matrix[(n, m)].im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn toeplitz_of_x1_is_tridiagonal() {
        let (space, grid) = setup(10, 1);
        let x1 = toeplitz(&space, &grid, &grid.sample(|x| x[0])).unwrap();
        assert!(x1.hermitian_defect() < 1e-13);
        assert!(x1.trace().norm() < 1e-12);
        for n in 0..=10usize {
            for m in 0..=10usize {
                if n.abs_diff(m) != 1 {
                    assert!(x1.matrix[(n, m)].norm() < 1e-13);
                } else {
                    assert!(x1.matrix[(n, m)].norm() > 1e-3);
                }
            }
        }
    }

    #[test]
    fn toeplitz_positivity_and_trace() {
        let (space, grid) = setup(8, 4);
        let f = grid.sample(|x| (x[0] - 0.3 * x[2]).powi(2) * (1.0 + x[1] * x[1]));
        let t = toeplitz(&space, &grid, &f).unwrap();
        assert!(eigenvalues(&t.matrix)[0] > -1e-10);
        // Bergman density (k+1)/2π is constant on CP¹.
        assert_abs_diff_eq!(t.trace().re, 9.0 / (2.0 * PI) * integrate(&grid, &f), epsilon = 1e-11);
    }

    #[test]
    fn kostant_souriau_of_height_has_linear_spectrum() {
        let (space, grid) = setup(16, 1);
        let h = Polynomial::new(vec![monomial(1.0, [0, 0, 1])]);
        let ks = kostant_souriau(&space, &grid, &h, 0.0).unwrap();
        for n in 0..=16 {
            for m in 0..=16 {
                let expected = if n == m { 1.0 - 2.0 * m as f64 / 16.0 } else { 0.0 };
                assert!((ks.matrix[(n, m)] - expected).norm() < 1e-11);
            }
        }
        assert!(ks.trace().norm() < 1e-11);
    }

    #[test]
    fn kostant_souriau_of_constant_is_scalar() {
        let (space, grid) = setup(6, 0);
        let ks = kostant_souriau(&space, &grid, &Polynomial::constant(2.5), 0.0).unwrap();
        assert!((&ks.matrix - CMatrix::identity(7, 7) * Complex64::new(2.5, 0.0)).camax() < 1e-12);
    }

    #[test]
    fn kostant_souriau_is_hermitian_for_real_symbols() {
        let (space, grid) = setup(10, 4);
        let h = Polynomial::new(vec![monomial(1.0, [1, 0, 1]), monomial(-0.6, [0, 2, 0]), monomial(0.4, [1, 1, 1])]);
        let ks = kostant_souriau(&space, &grid, &h, 0.0).unwrap();
        assert!(ks.hermitian_defect() < 1e-11);
    }

    #[test]
    fn kostant_souriau_and_toeplitz_differ_at_order_one_over_k() {
        let h = Polynomial::new(vec![monomial(1.0, [0, 0, 2]), monomial(0.5, [1, 1, 0])]);
        let mut scaled = Vec::new();
        for k in [16usize, 32, 64] {
            let (space, grid) = setup(k, 2);
            let ks = kostant_souriau(&space, &grid, &h, 0.0).unwrap();
            let t = toeplitz(&space, &grid, &grid.sample(|x| h.value(0.0, x))).unwrap();
            scaled.push(crate::unimetric::operator_norm(&(&ks.matrix - &t.matrix)) * k as f64);
        }
        assert!(scaled.iter().all(|s| *s < 10.0), "{scaled:?}");
        assert!(scaled[2] < 1.5 * scaled[0]);
    }

    #[test]
    fn commutator_matches_poisson_bracket() {
        // {x₁, x₂} = ω(X_{x₁}, X_{x₂}) = 2x₃ in this normalization.
        let mut scaled = Vec::new();
        for k in [16usize, 32, 64] {
            let (space, grid) = setup(k, 1);
            let a = toeplitz(&space, &grid, &grid.sample(|x| x[0])).unwrap().matrix;
            let b = toeplitz(&space, &grid, &grid.sample(|x| x[1])).unwrap().matrix;
            let bracket = toeplitz(&space, &grid, &grid.sample(|x| 2.0 * x[2])).unwrap().matrix;
            let lhs = &a * &b - &b * &a;
            let rhs = bracket * Complex64::new(0.0, -1.0 / k as f64);
            scaled.push(crate::unimetric::operator_norm(&(lhs - rhs)) * (k * k) as f64);
        }
        assert!(scaled.windows(2).all(|w| w[1] < 1.2 * w[0] + 1e-6), "{scaled:?}");
    }

    #[test]
    fn toeplitz_norm_of_height_increases_to_one() {
        let norms: Vec<f64> = [4usize, 8, 16, 32]
            .iter()
            .map(|&k| {
                let (space, grid) = setup(k, 1);
                crate::unimetric::operator_norm(&toeplitz(&space, &grid, &grid.sample(|x| x[2])).unwrap().matrix)
            })
            .collect();
        assert!(norms.windows(2).all(|w| w[0] < w[1]) && norms[3] < 1.0);
    }

    #[test]
    fn trace_expansion_examples() {
        assert_eq!(lambda_prime(), 1.0);
        let (space, grid) = setup(16, 2);
        let round = grid.sample(|_| 2.0);
        let one = trace_expansion_check(&space, &grid, &Polynomial::constant(1.0), &round).unwrap();
        assert!(one.abs() < 1e-10);
        let z = trace_expansion_check(&space, &grid, &Polynomial::new(vec![monomial(1.0, [0, 0, 1])]), &round).unwrap();
        assert!(z.abs() < 1e-10);
    }

    #[test]
    fn resolution_is_enforced() {
        let space = QuantumSpace::new(10).unwrap();
        let grid = SphereGrid::new(12);
        assert!(matches!(toeplitz(&space, &grid, &grid.sample(|_| 1.0)), Err(Error::Precondition(_))));
    }
}
