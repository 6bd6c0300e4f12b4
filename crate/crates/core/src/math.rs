//! Fixed-size linear algebra and interpolation kernels shared by the solvers.
//!
//! Solver hot paths run in `f32`. The polar decomposition iterates in `f64`
//! internally because its convergence tolerance is below `f32` resolution.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use thiserror::Error;

pub type Real = f32;
pub type Vec3 = Vector3<Real>;
pub type Mat3 = Matrix3<Real>;
pub type Quat = UnitQuaternion<Real>;

/// Determinants with magnitude at or below this are treated as singular.
pub const SINGULAR_DET: f64 = 1e-12;

const POLAR_TOLERANCE: f64 = 1e-8;
const POLAR_MAX_ITERATIONS: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MathError {
    #[error("position {position:?} is outside the grid interior band")]
    OutOfDomain { position: [Real; 3] },
    #[error("matrix is singular (det = {det})")]
    Singular { det: f64 },
    #[error("polar decomposition requires det > 0 and finite entries (det = {det})")]
    Decomposition { det: f64 },
}

/// Quadratic B-spline weights of one particle over its 3x3x3 node stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplineWeights {
    /// Grid index of the stencil's lowest node on each axis.
    pub base_node: [usize; 3],
    /// `w[axis][offset]`, offset in {0, 1, 2} relative to `base_node`.
    pub w: [[Real; 3]; 3],
    /// Derivative of `w[axis][offset]` along `axis`, in 1/m.
    pub dw: [[Real; 3]; 3],
}

impl SplineWeights {
    /// Product weight of stencil node `(a, b, c)`.
    #[inline]
    pub fn weight(&self, a: usize, b: usize, c: usize) -> Real {
        self.w[0][a] * self.w[1][b] * self.w[2][c]
    }

    /// Gradient of the product weight of stencil node `(a, b, c)`.
    #[inline]
    pub fn gradient(&self, a: usize, b: usize, c: usize) -> Vec3 {
        let w = &self.w;
        let dw = &self.dw;
        Vec3::new(
            dw[0][a] * w[1][b] * w[2][c],
            w[0][a] * dw[1][b] * w[2][c],
            w[0][a] * w[1][b] * dw[2][c],
        )
    }
}

/// 1D quadratic B-spline basis `N(x)`.
pub fn bspline_basis(x: Real) -> Real {
    let ax = x.abs();
    if ax < 0.5 {
        0.75 - ax * ax
    } else if ax < 1.5 {
        0.5 * (1.5 - ax) * (1.5 - ax)
    } else {
        0.0
    }
}

/// Grid coordinate of `pos` in cell units.
#[inline]
pub fn grid_coordinate(pos: &Vec3, origin: &Vec3, dx: Real) -> Vec3 {
    (pos - origin) / dx
}

/// True when the grid coordinate lies at least 1.5 cells inside the node
/// lattice `[0, dims - 1]` on every axis.
#[inline]
pub fn in_interior_band(local: &Vec3, dims: [usize; 3]) -> bool {
    (0..3).all(|a| {
        let hi = (dims[a] as Real) - 2.5;
        local[a].is_finite() && local[a] >= 1.5 && local[a] <= hi
    })
}

/// Weights of `pos` over the three nearest nodes per axis.
pub fn quadratic_bspline_weights(
    pos: &Vec3,
    origin: &Vec3,
    dx: Real,
    dims: [usize; 3],
) -> Result<SplineWeights, MathError> {
    let local = grid_coordinate(pos, origin, dx);
    if !in_interior_band(&local, dims) {
        return Err(MathError::OutOfDomain {
            position: [pos.x, pos.y, pos.z],
        });
    }
    Ok(weights_unchecked(&local, dx))
}

/// Weight evaluation without the band check; `local` is in cell units.
#[inline]
pub(crate) fn weights_unchecked(local: &Vec3, dx: Real) -> SplineWeights {
    let inv_dx = 1.0 / dx;
    let mut base_node = [0usize; 3];
    let mut w = [[0.0; 3]; 3];
    let mut dw = [[0.0; 3]; 3];
    for a in 0..3 {
        let base = (local[a] - 0.5).floor();
        base_node[a] = base as usize;
        // fx in [0.5, 1.5): distance from the base node in cells.
        let fx = local[a] - base;
        w[a] = [
            0.5 * (1.5 - fx) * (1.5 - fx),
            0.75 - (fx - 1.0) * (fx - 1.0),
            0.5 * (fx - 0.5) * (fx - 0.5),
        ];
        dw[a] = [
            -(1.5 - fx) * inv_dx,
            -2.0 * (fx - 1.0) * inv_dx,
            (fx - 0.5) * inv_dx,
        ];
    }
    SplineWeights { base_node, w, dw }
}

/// Determinant and inverse; the inverse is `None` when `|det| <= 1e-12`.
pub fn mat3_det_inv(m: &Mat3) -> (Real, Option<Mat3>) {
    let md = m.cast::<f64>();
    let det = md.determinant();
    if !det.is_finite() || det.abs() <= SINGULAR_DET {
        return (det as Real, None);
    }
    let inv = md.try_inverse().map(|i| i.cast::<Real>());
    (det as Real, inv)
}

/// Inverse or a singular-matrix error.
pub fn mat3_inverse(m: &Mat3) -> Result<Mat3, MathError> {
    match mat3_det_inv(m) {
        (_, Some(inv)) => Ok(inv),
        (det, None) => Err(MathError::Singular { det: det as f64 }),
    }
}

/// Polar decomposition `m = r * u` with `r` a proper rotation and `u`
/// symmetric positive definite.
///
/// Scaled Newton iteration on `X <- (g X + X^-T / g) / 2`; stops when the
/// Frobenius change between iterates drops below 1e-8 or after 50 iterations.
pub fn polar_decompose(m: &Mat3) -> Result<(Mat3, Mat3), MathError> {
    let (r, u) = polar_decompose_f64(&m.cast::<f64>())?;
    Ok((r.cast::<Real>(), u.cast::<Real>()))
}

pub(crate) fn polar_decompose_f64(
    m: &Matrix3<f64>,
) -> Result<(Matrix3<f64>, Matrix3<f64>), MathError> {
    let det = m.determinant();
    if !det.is_finite() || det <= 0.0 || m.iter().any(|v| !v.is_finite()) {
        return Err(MathError::Decomposition { det });
    }
    let mut x = *m;
    for _ in 0..POLAR_MAX_ITERATIONS {
        let inv = x
            .try_inverse()
            .ok_or(MathError::Decomposition { det: x.determinant() })?;
        let inv_t = inv.transpose();
        let gamma = (inv.norm() / x.norm()).sqrt();
        let next = (x * gamma + inv_t / gamma) * 0.5;
        let delta = (next - x).norm();
        x = next;
        if delta < POLAR_TOLERANCE {
            break;
        }
    }
    let u = x.transpose() * m;
    let u = (u + u.transpose()) * 0.5;
    Ok((x, u))
}

#[inline]
pub fn outer(a: &Vec3, b: &Vec3) -> Mat3 {
    a * b.transpose()
}

pub fn is_finite_vec(v: &Vec3) -> bool {
    v.x.is_finite() && v.y.is_finite() && v.z.is_finite()
}

pub fn to_vec3(a: [Real; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

pub fn from_vec3(v: &Vec3) -> [Real; 3] {
    [v.x, v.y, v.z]
}

/// Builds a unit quaternion from `[w, x, y, z]` components.
pub fn quat_from_wxyz(q: [Real; 4]) -> Quat {
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]))
}

pub fn quat_to_wxyz(q: &Quat) -> [Real; 4] {
    [q.w, q.i, q.j, q.k]
}
