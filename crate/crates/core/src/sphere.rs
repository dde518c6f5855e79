//! The unit sphere as a prequantized symplectic manifold.
//!
//! `ω` is half the round area form, so `∫ ω = 2π` and `[ω/2π]` is the class of
//! `O(1)`. Functions live in embedded coordinates `x ∈ R³, |x| = 1`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Total symplectic volume `∫ ω`.
pub const VOLUME: f64 = 2.0 * PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi's initial guess, refined by Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// One latitude circle of the product grid.
#[derive(Clone, Copy, Debug)]
pub struct Ring {
    /// Height `x₃` of the ring.
    pub height: f64,
    /// Liouville weight of each node on this ring.
    pub node_weight: f64,
}

/// Gauss–Legendre in `x₃` times uniform azimuth; exact for polynomials of degree ≤ `degree`.
#[derive(Clone, Debug)]
pub struct SphereGrid {
    degree: usize,
    n_phi: usize,
    rings: Vec<Ring>,
    nodes: Vec<Vec3>,
    weights: Vec<f64>,
}

impl SphereGrid {
    pub fn new(degree: usize) -> Self {
        let n_theta = (degree + 2) / 2;
        let n_phi = degree + 1;
        let (heights, gl) = gauss_legendre(n_theta);
        let mut rings = Vec::with_capacity(n_theta);
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (&h, &w) in heights.iter().zip(&gl) {
            let node_weight = 0.5 * w * 2.0 * PI / n_phi as f64;
            rings.push(Ring { height: h, node_weight });
            let s = (1.0 - h * h).sqrt();
            for l in 0..n_phi {
                let phi = 2.0 * PI * l as f64 / n_phi as f64;
                nodes.push(Vec3::new(s * phi.cos(), s * phi.sin(), h));
                weights.push(node_weight);
            }
        }
        Self { degree, n_phi, rings, nodes, weights }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    /// Nodes ring by ring; node `l` of ring `r` has index `r·n_phi + l` and azimuth `2πl/n_phi`.
    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn sample(&self, f: impl Fn(&Vec3) -> f64 + Sync + Send) -> ScalarField {
        ScalarField { values: self.nodes.par_iter().map(f).collect() }
    }
}

/// Values of a real function at the nodes of a [`SphereGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("scalar field has non-finite values".into()));
        }
        Ok(Self { values })
    }
}

/// `∫ f μ` by the grid quadrature.
pub fn integrate(grid: &SphereGrid, f: &ScalarField) -> f64 {
    assert_eq!(grid.len(), f.values.len(), "field does not live on this grid");
    f.values.iter().zip(grid.weights()).map(|(v, w)| v * w).sum()
}

/// `f − (∫ f μ)/Vol`.
pub fn normalize(grid: &SphereGrid, f: &ScalarField) -> ScalarField {
    let mean = integrate(grid, f) / grid.weights().iter().sum::<f64>();
    ScalarField { values: f.values.iter().map(|v| v - mean).collect() }
}

/// A time-dependent Hamiltonian `H_t(x)` on the sphere, `t ∈ [0, 1]`.
///
/// Gradients and Hessians are ambient (in `R³`) and only their tangential
/// parts matter. The defaults differentiate the degree-0 extension `H(x/|x|)`.
pub trait Hamiltonian: Send + Sync {
    fn value(&self, t: f64, x: &Vec3) -> f64;

    fn gradient(&self, t: f64, x: &Vec3) -> Vec3 {
        let h = 1e-5;
        let f = |y: Vec3| self.value(t, &(y / y.norm()));
        Vec3::from_fn(|i, _| {
            let mut e = Vec3::zeros();
            e[i] = h;
            (f(x + e) - f(x - e)) / (2.0 * h)
        })
    }

    fn hessian(&self, t: f64, x: &Vec3) -> Mat3 {
        let h = 1e-4;
        let mut m = Mat3::zeros();
        for j in 0..3 {
            let mut e = Vec3::zeros();
            e[j] = h;
            let d = (self.gradient(t, &(x + e)) - self.gradient(t, &(x - e))) / (2.0 * h);
            m.set_column(j, &d);
        }
        0.5 * (m + m.transpose())
    }

    fn is_time_independent(&self) -> bool {
        false
    }

    /// `X_t` with `ω(X, ·) = −dH`, namely `2 x × ∇H`.
    fn vector_field(&self, t: f64, x: &Vec3) -> Vec3 {
        2.0 * x.cross(&self.gradient(t, x))
    }

    /// Ambient derivative of [`Hamiltonian::vector_field`].
    fn vector_field_jacobian(&self, t: f64, x: &Vec3) -> Mat3 {
        let g = self.gradient(t, x);
        2.0 * (-g.cross_matrix() + x.cross_matrix() * self.hessian(t, x))
    }
}

/// Shared handle on a Hamiltonian path, with a label used in reports.
#[derive(Clone)]
pub struct HamiltonianPath {
    inner: Arc<dyn Hamiltonian>,
    label: String,
}

impl HamiltonianPath {
    pub fn new(label: impl Into<String>, h: impl Hamiltonian + 'static) -> Self {
        Self { inner: Arc::new(h), label: label.into() }
    }

    pub fn from_arc(label: impl Into<String>, inner: Arc<dyn Hamiltonian>) -> Self {
        Self { inner, label: label.into() }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn field_at(&self, grid: &SphereGrid, t: f64) -> ScalarField {
        grid.sample(|x| self.inner.value(t, x))
    }
}

impl fmt::Debug for HamiltonianPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HamiltonianPath({})", self.label)
    }
}

impl Hamiltonian for HamiltonianPath {
    fn value(&self, t: f64, x: &Vec3) -> f64 {
        self.inner.value(t, x)
    }
    fn gradient(&self, t: f64, x: &Vec3) -> Vec3 {
        self.inner.gradient(t, x)
    }
    fn hessian(&self, t: f64, x: &Vec3) -> Mat3 {
        self.inner.hessian(t, x)
    }
    fn is_time_independent(&self) -> bool {
        self.inner.is_time_independent()
    }
    fn vector_field(&self, t: f64, x: &Vec3) -> Vec3 {
        self.inner.vector_field(t, x)
    }
    fn vector_field_jacobian(&self, t: f64, x: &Vec3) -> Mat3 {
        self.inner.vector_field_jacobian(t, x)
    }
}

/// Time modulation of a polynomial term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeProfile {
    Constant,
    /// `t`
    Linear,
    /// `sin(πt)`
    SinPi,
    /// `cos(πt)`
    CosPi,
}

impl TimeProfile {
    pub fn at(self, t: f64) -> f64 {
        match self {
            Self::Constant => 1.0,
            Self::Linear => t,
            Self::SinPi => (PI * t).sin(),
            Self::CosPi => (PI * t).cos(),
        }
    }

    /// `∫₀¹` of the profile.
    pub fn mean(self) -> f64 {
        match self {
            Self::Constant => 1.0,
            Self::Linear => 0.5,
            Self::SinPi => 2.0 / PI,
            Self::CosPi => 0.0,
        }
    }
}

/// `coeff · profile(t) · x₁^a x₂^b x₃^c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term {
    pub coeff: f64,
    pub profile: TimeProfile,
    pub powers: [u32; 3],
}

impl Term {
    pub fn new(coeff: f64, profile: TimeProfile, powers: [u32; 3]) -> Self {
        Self { coeff, profile, powers }
    }
}

fn ipow(x: f64, n: i64) -> f64 {
    if n < 0 {
        0.0
    } else {
        x.powi(n as i32)
    }
}

/// Polynomial Hamiltonian in the embedded coordinates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Polynomial {
    pub terms: Vec<Term>,
}

impl Polynomial {
    pub fn new(terms: Vec<Term>) -> Self {
        Self { terms }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![Term::new(c, TimeProfile::Constant, [0, 0, 0])])
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.powers.iter().sum()).max().unwrap_or(0)
    }

    fn monomial_derivative(p: [u32; 3], x: &Vec3, d: [u32; 3]) -> f64 {
        let mut v = 1.0;
        for i in 0..3 {
            let n = p[i] as i64;
            let k = d[i] as i64;
            if k > n {
                return 0.0;
            }
            let falling: i64 = (0..k).map(|j| n - j).product();
            v *= falling as f64 * ipow(x[i], n - k);
        }
        v
    }
}

impl Hamiltonian for Polynomial {
    fn value(&self, t: f64, x: &Vec3) -> f64 {
        self.terms
            .iter()
            .map(|m| m.coeff * m.profile.at(t) * Self::monomial_derivative(m.powers, x, [0, 0, 0]))
            .sum()
    }

    fn gradient(&self, t: f64, x: &Vec3) -> Vec3 {
        let mut g = Vec3::zeros();
        for m in &self.terms {
            let c = m.coeff * m.profile.at(t);
            for i in 0..3 {
                let mut d = [0; 3];
                d[i] = 1;
                g[i] += c * Self::monomial_derivative(m.powers, x, d);
            }
        }
        g
    }

    fn hessian(&self, t: f64, x: &Vec3) -> Mat3 {
        let mut h = Mat3::zeros();
        for m in &self.terms {
            let c = m.coeff * m.profile.at(t);
            for i in 0..3 {
                for j in 0..3 {
                    let mut d = [0; 3];
                    d[i] += 1;
                    d[j] += 1;
                    h[(i, j)] += c * Self::monomial_derivative(m.powers, x, d);
                }
            }
        }
        h
    }

    fn is_time_independent(&self) -> bool {
        self.terms.iter().all(|m| m.profile == TimeProfile::Constant)
    }
}

/// `H^s_t = s'(t)·H_{s(t)}`, which generates `t ↦ φ_{s(t)}`.
pub struct Reparameterized {
    inner: HamiltonianPath,
    schedule: fn(f64) -> (f64, f64),
}

impl Reparameterized {
    /// `schedule(t) = (s(t), s'(t))` with `s(0) = 0`, `s(1) = 1`.
    pub fn new(inner: HamiltonianPath, schedule: fn(f64) -> (f64, f64)) -> Self {
        Self { inner, schedule }
    }
}

/// `s(t) = 3t² − 2t³`.
pub fn smoothstep(t: f64) -> (f64, f64) {
    (t * t * (3.0 - 2.0 * t), 6.0 * t * (1.0 - t))
}

impl Hamiltonian for Reparameterized {
    fn value(&self, t: f64, x: &Vec3) -> f64 {
        let (s, ds) = (self.schedule)(t);
        ds * self.inner.value(s, x)
    }
    fn gradient(&self, t: f64, x: &Vec3) -> Vec3 {
        let (s, ds) = (self.schedule)(t);
        ds * self.inner.gradient(s, x)
    }
    fn hessian(&self, t: f64, x: &Vec3) -> Mat3 {
        let (s, ds) = (self.schedule)(t);
        ds * self.inner.hessian(s, x)
    }
}

/// Gauss–Legendre rule on `[0, 1]`.
pub fn unit_interval_rule(n: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    x.into_iter().zip(w).map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect()
}

/// `Cal(γ) = ∫₀¹ ∫_M H_t μ dt`, Gauss–Legendre in time with `time_nodes` points.
pub fn calabi(grid: &SphereGrid, path: &dyn Hamiltonian, time_nodes: usize) -> f64 {
    unit_interval_rule(time_nodes)
        .into_iter()
        .map(|(t, w)| w * integrate(grid, &grid.sample(|x| path.value(t, x))))
        .sum()
}

/// Access to `α_t⁻¹` for a flow `α_t`.
pub trait InverseFlow: Send + Sync {
    fn inverse(&self, t: f64, x: &Vec3) -> Vec3;
}

/// Generator `(f ⋆ g)_t = f_t + g_t ∘ α_t⁻¹` of the pointwise product `α_t β_t`,
/// where `α` is the flow of `f` and `β` the flow of `g`.
pub struct StarProduct {
    f: HamiltonianPath,
    g: HamiltonianPath,
    flow_of_f: Arc<dyn InverseFlow>,
}

impl StarProduct {
    pub fn new(f: HamiltonianPath, g: HamiltonianPath, flow_of_f: Arc<dyn InverseFlow>) -> Self {
        Self { f, g, flow_of_f }
    }
}

impl Hamiltonian for StarProduct {
    fn value(&self, t: f64, x: &Vec3) -> f64 {
        self.f.value(t, x) + self.g.value(t, &self.flow_of_f.inverse(t, x))
    }
}

pub fn star_product(f: &HamiltonianPath, g: &HamiltonianPath, flow_of_f: Arc<dyn InverseFlow>) -> HamiltonianPath {
    let label = format!("({})*({})", f.label(), g.label());
    HamiltonianPath::new(label, StarProduct::new(f.clone(), g.clone(), flow_of_f))
}
