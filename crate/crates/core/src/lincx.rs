//! Compatible linear complex structures of the symplectic plane.
//!
//! The space of complex structures `j` on `(R^2, ω₀)` with `ω₀(jX, jY) = ω₀(X, Y)`
//! and `ω₀(X, jX) > 0` is a copy of the hyperbolic plane. Points are identified
//! with the upper half-plane through the induced metric `g = ω₀(·, j·)`:
//!
//! ```text
//! g = (1/y) [[x² + y², x], [x, 1]]   <->   τ = x + iy
//! ```
//!
//! Everything here works with plain 2×2 matrices in a fixed orthonormal,
//! positively oriented basis, where `ω₀(u, v) = uᵀ Ω v` with `Ω = [[0, 1], [-1, 0]]`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::Matrix2;

use crate::error::{Error, Result};

pub type Mat2 = Matrix2<f64>;

/// Matrix of the standard symplectic form: `ω₀(u, v) = uᵀ Ω v`.
pub fn omega0() -> Mat2 {
    Mat2::new(0.0, 1.0, -1.0, 0.0)
}

const STRUCTURE_TOL: f64 = 1e-9;
const TANGENT_TOL: f64 = 1e-9;

/// A compatible complex structure `j` of the symplectic plane.
///
/// Construction re-projects the input onto the exact constraint set, so
/// `j² = -1` holds to rounding error afterwards.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearComplexStructure {
    j: Mat2,
}

impl LinearComplexStructure {
    /// Validates `j` (`j² = -1`, positivity of `ω₀(X, jX)`) and re-projects it.
    pub fn new(j: Mat2) -> Result<Self> {
        let square = j * j + Mat2::identity();
        if square.amax() > STRUCTURE_TOL * (1.0 + j.norm_squared()) {
            return Err(Error::Domain(format!("j² ≠ -1 (defect {:.3e})", square.amax())));
        }
        let g = omega0() * j;
        if (g[(0, 1)] - g[(1, 0)]).abs() > STRUCTURE_TOL * (1.0 + g.amax()) {
            return Err(Error::Domain("j is not compatible with ω₀".into()));
        }
        let g = 0.5 * (g + g.transpose());
        if g[(0, 0)] <= 0.0 || g.determinant() <= 0.0 {
            return Err(Error::Domain("ω₀(X, jX) is not positive".into()));
        }
        Self::from_metric(g)
    }

    /// The complex structure whose induced metric is proportional to `g`.
    pub fn from_metric(g: Mat2) -> Result<Self> {
        let g = 0.5 * (g + g.transpose());
        let det = g.determinant();
        if !(g[(0, 0)] > 0.0 && det > 0.0 && det.is_finite()) {
            return Err(Error::Domain("metric is not positive definite".into()));
        }
        let g = g / det.sqrt();
        Ok(Self { j: -omega0() * g })
    }

    /// `j = [[0, -1], [1, 0]]`, the rotation by a quarter turn.
    pub fn standard() -> Self {
        Self { j: Mat2::new(0.0, -1.0, 1.0, 0.0) }
    }

    pub fn from_upper_half_plane(x: f64, y: f64) -> Result<Self> {
        if !(y > 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(Error::Domain(format!("τ = {x} + {y}i is not in the upper half-plane")));
        }
        Self::from_metric(Mat2::new(x * x + y * y, x, x, 1.0) / y)
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.j
    }

    /// Induced metric `g = Ω j`, symmetric with unit determinant.
    pub fn metric(&self) -> Mat2 {
        omega0() * self.j
    }

    /// Coordinates `(x, y)` of the point in the upper half-plane model.
    pub fn upper_half_plane(&self) -> (f64, f64) {
        let g = self.metric();
        let y = 1.0 / g[(1, 1)];
        (g[(0, 1)] * y, y)
    }

    /// `P j P⁻¹` for `P` with positive determinant.
    pub fn conjugate(&self, p: &Mat2) -> Result<Self> {
        let inv = p
            .try_inverse()
            .ok_or_else(|| Error::Domain("conjugating matrix is singular".into()))?;
        if p.determinant() <= 0.0 {
            return Err(Error::Domain("conjugating matrix reverses orientation".into()));
        }
        Self::new(p * self.j * inv)
    }

    pub fn distance_to(&self, other: &Self) -> f64 {
        (self.j - other.j).amax()
    }
}

/// A tangent vector `a` to the space of complex structures at `base`.
#[derive(Clone, Copy, Debug)]
pub struct SiegelTangent {
    a: Mat2,
    base: LinearComplexStructure,
}

impl SiegelTangent {
    pub fn new(base: LinearComplexStructure, a: Mat2) -> Result<Self> {
        let j = base.matrix();
        let scale = 1.0 + a.amax();
        let anti = j * a + a * j;
        if anti.amax() > TANGENT_TOL * scale {
            return Err(Error::Domain("tangent does not anticommute with j".into()));
        }
        let w = omega0();
        let sym = a.transpose() * w * j + j.transpose() * w * a;
        if sym.amax() > TANGENT_TOL * scale {
            return Err(Error::Domain("tangent does not preserve compatibility".into()));
        }
        Ok(Self { a, base })
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.a
    }

    pub fn base(&self) -> &LinearComplexStructure {
        &self.base
    }

    /// The tangent `j a`, image of `a` under the complex structure of the space.
    pub fn rotate(&self) -> Self {
        Self { a: self.base.matrix() * self.a, base: self.base }
    }
}

/// The symplectic form `σ_j(a, b) = ¼ tr(j a b)`.
pub fn sigma_form(a: &SiegelTangent, b: &SiegelTangent) -> Result<f64> {
    if a.base.distance_to(&b.base) > 1e-12 {
        return Err(Error::Domain("tangent vectors live at different base points".into()));
    }
    Ok(0.25 * (a.base.matrix() * a.a * b.a).trace())
}

/// Point at parameter `t` on the geodesic from `j0` to `j1`.
///
/// With `A = -j0 j1` (positive, unit determinant, self-adjoint for the metric
/// of `j0`), the geodesic is `j0 A^t`. Writing the eigenvalues of `A` as
/// `e^{±s}` gives the closed form
/// `A^t = cosh(ts) + sinh(ts)/sinh(s) · (A - cosh(s))`.
pub fn geodesic(j0: &LinearComplexStructure, j1: &LinearComplexStructure, t: f64) -> LinearComplexStructure {
    let a = -(j0.matrix() * j1.matrix());
    let half_trace = (0.5 * a.trace()).max(1.0);
    let s = half_trace.acosh();
    let ratio = if s < 1e-6 {
        t * (1.0 + (t * t - 1.0) * s * s / 6.0)
    } else {
        (t * s).sinh() / s.sinh()
    };
    let power = Mat2::identity() * (t * s).cosh() + (a - Mat2::identity() * half_trace) * ratio;
    let jt = j0.matrix() * power;
    // jt is compatible up to rounding; re-project.
    LinearComplexStructure::from_metric(omega0() * jt).unwrap_or(*j0)
}

/// Riemannian length of the geodesic segment between two structures.
pub fn geodesic_distance(j0: &LinearComplexStructure, j1: &LinearComplexStructure) -> f64 {
    let a = -(j0.matrix() * j1.matrix());
    (0.5 * a.trace()).max(1.0).acosh()
}

/// Traversal direction of a [`SiegelLoop`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Orientation {
    #[default]
    Forward,
    Reverse,
}

/// A closed polygonal loop; consecutive samples are joined by geodesic segments.
#[derive(Clone, Debug)]
pub struct SiegelLoop {
    samples: Vec<LinearComplexStructure>,
    orientation: Orientation,
}

impl SiegelLoop {
    pub fn new(samples: Vec<LinearComplexStructure>, orientation: Orientation) -> Result<Self> {
        let (first, last) = match (samples.first(), samples.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::Domain("empty loop".into())),
        };
        if first.distance_to(last) > 1e-10 {
            return Err(Error::Domain(format!(
                "loop is not closed (endpoint gap {:.3e})",
                first.distance_to(last)
            )));
        }
        Ok(Self { samples, orientation })
    }

    /// Closes the open path `samples` with the geodesic from its last point back to its first.
    pub fn closing(mut samples: Vec<LinearComplexStructure>) -> Result<Self> {
        let first = *samples.first().ok_or_else(|| Error::Domain("empty loop".into()))?;
        samples.push(first);
        Self::new(samples, Orientation::Forward)
    }

    pub fn samples(&self) -> &[LinearComplexStructure] {
        &self.samples
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }
}

/// `σ = c_σ · dx ∧ dy / y²` in upper half-plane coordinates.
///
/// Evaluated once from [`sigma_form`] at `τ = i` with the coordinate tangent
/// vectors obtained by differentiating `τ ↦ j(τ)`.
pub fn sigma_area_constant() -> f64 {
    static CONSTANT: OnceLock<f64> = OnceLock::new();
    *CONSTANT.get_or_init(|| {
        let h = 1e-3;
        let at = |x: f64, y: f64| *LinearComplexStructure::from_upper_half_plane(x, y).unwrap().matrix();
        let d = |f: &dyn Fn(f64) -> Mat2| (f(-2.0 * h) - f(2.0 * h) + 8.0 * (f(h) - f(-h))) / (12.0 * h);
        let ax = d(&|e| at(e, 1.0));
        let ay = d(&|e| at(0.0, 1.0 + e));
        let base = LinearComplexStructure::standard();
        let a = SiegelTangent { a: ax, base };
        let b = SiegelTangent { a: ay, base };
        sigma_form(&a, &b).expect("same base point")
    })
}

/// `∫ dx/y` along the hyperbolic geodesic from `a` to `b` (upper half-plane).
///
/// Along a geodesic circle `x = c + R cos θ, y = R sin θ` the integrand is
/// `-dθ`; on vertical geodesics it vanishes.
pub fn segment_primitive(a: (f64, f64), b: (f64, f64)) -> f64 {
    let dx = b.0 - a.0;
    let scale = a.0.abs().max(b.0.abs()).max(a.1).max(b.1);
    if dx.abs() <= 1e-15 * scale {
        return 0.0;
    }
    let c = ((b.0 * b.0 + b.1 * b.1) - (a.0 * a.0 + a.1 * a.1)) / (2.0 * dx);
    let (ux, uy) = (a.0 - c, a.1);
    let (vx, vy) = (b.0 - c, b.1);
    let dtheta = (ux * vy - uy * vx).atan2(ux * vx + uy * vy);
    -dtheta
}

/// Signed hyperbolic area (w.r.t. `dx ∧ dy / y²`) enclosed by a geodesic polygon.
pub fn hyperbolic_area(points: &[(f64, f64)]) -> f64 {
    points.windows(2).map(|w| segment_primitive(w[0], w[1])).sum()
}

/// `∫_D σ` over any disc bounded by the loop.
pub fn loop_area(lp: &SiegelLoop) -> f64 {
    let points: Vec<(f64, f64)> = lp.samples.iter().map(|j| j.upper_half_plane()).collect();
    let area = sigma_area_constant() * hyperbolic_area(&points);
    match lp.orientation {
        Orientation::Forward => area,
        Orientation::Reverse => -area,
    }
}

/// Interior angle sum defect `π - (α + β + γ)`: the area of a hyperbolic triangle.
pub fn triangle_defect(angles: [f64; 3]) -> f64 {
    PI - angles.iter().sum::<f64>()
}
