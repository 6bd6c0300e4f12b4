//! Constitutive models: Neo-Hookean Cauchy stress for the force-based solvers
//! and the co-rotational constraint projection used by position-based MPM.

use thiserror::Error;

use crate::math::{polar_decompose_f64, Mat3, MathError, Real};

/// Lower clamp on `J = det(F)` when a solver evaluates stress for an
/// inverted or collapsed particle.
pub const MIN_VOLUME_RATIO: Real = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialError {
    #[error("Poisson ratio must lie in [0, 0.5), got {0}")]
    BadPoissonRatio(Real),
    #[error("Young's modulus must be positive, got {0}")]
    BadYoungsModulus(Real),
    #[error("invalid material parameters: mu = {mu}, lambda = {lambda}, beta = {beta}")]
    BadParameters { mu: Real, lambda: Real, beta: Real },
    #[error("deformation gradient is inverted or degenerate (det = {0})")]
    Inverted(Real),
    #[error("co-rotational projection failed: {0}")]
    Projection(#[from] MathError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKind {
    NeoHookean,
    CorotationalPb,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub kind: MaterialKind,
    pub mu: Real,
    pub lambda: Real,
    /// Blend between the rotation and the volume-normalised trial gradient.
    pub beta: Real,
}

impl Material {
    pub fn new(kind: MaterialKind, mu: Real, lambda: Real, beta: Real) -> Result<Self, MaterialError> {
        if !(mu > 0.0) || !(lambda >= 0.0) || !(0.0..=1.0).contains(&beta) {
            return Err(MaterialError::BadParameters { mu, lambda, beta });
        }
        Ok(Self {
            kind,
            mu,
            lambda,
            beta,
        })
    }
}

/// Lamé parameters `(mu, lambda)` from Young's modulus and Poisson ratio.
pub fn lame_from_young_poisson(e: Real, nu: Real) -> Result<(Real, Real), MaterialError> {
    if !(e > 0.0) {
        return Err(MaterialError::BadYoungsModulus(e));
    }
    if !(0.0..0.5).contains(&nu) {
        return Err(MaterialError::BadPoissonRatio(nu));
    }
    let (e, nu) = (e as f64, nu as f64);
    let mu = e / (2.0 * (1.0 + nu));
    let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    Ok((mu as Real, lambda as Real))
}

/// `sigma = (mu (F F^T - I) + lambda ln(J) I) / J`, evaluated in f64.
pub fn neo_hookean_cauchy_stress(f: &Mat3, mu: Real, lambda: Real) -> Result<Mat3, MaterialError> {
    let f = f.cast::<f64>();
    let j = f.determinant();
    if !(j > 0.0) || !j.is_finite() {
        return Err(MaterialError::Inverted(j as Real));
    }
    Ok(cauchy_with_ratio(&f, j, mu, lambda))
}

/// Stress with `J` clamped to at least [`MIN_VOLUME_RATIO`]. The flag is set
/// when the clamp was needed.
pub fn neo_hookean_cauchy_stress_clamped(f: &Mat3, mu: Real, lambda: Real) -> (Mat3, bool) {
    let f = f.cast::<f64>();
    let j = f.determinant();
    let min = MIN_VOLUME_RATIO as f64;
    let inverted = !(j > min) || !j.is_finite();
    let j = if inverted { min } else { j };
    (cauchy_with_ratio(&f, j, mu, lambda), inverted)
}

#[inline]
fn cauchy_with_ratio(f: &nalgebra::Matrix3<f64>, j: f64, mu: Real, lambda: Real) -> Mat3 {
    let b = f * f.transpose();
    let mut s = (b - nalgebra::Matrix3::identity()) * mu as f64;
    let p = lambda as f64 * j.ln();
    s[(0, 0)] += p;
    s[(1, 1)] += p;
    s[(2, 2)] += p;
    (s / j).cast::<Real>()
}

/// Projects a candidate velocity gradient onto the co-rotational constraint.
///
/// The trial gradient `F* = (I + C dt) F_prev` is replaced by
/// `beta R + (1 - beta) F* / det(F*)` and the velocity gradient that maps
/// `F_prev` onto it is returned.
pub fn corotational_project(
    f_prev: &Mat3,
    c_candidate: &Mat3,
    dt: Real,
    beta: Real,
) -> Result<Mat3, MaterialError> {
    let f_prev = f_prev.cast::<f64>();
    let c = c_candidate.cast::<f64>();
    let dt = dt as f64;
    let beta = beta as f64;
    let identity = nalgebra::Matrix3::<f64>::identity();

    let det_prev = f_prev.determinant();
    if !(det_prev.abs() > crate::math::SINGULAR_DET) {
        return Err(MathError::Singular { det: det_prev }.into());
    }
    let f_prev_inv = f_prev
        .try_inverse()
        .ok_or(MathError::Singular { det: det_prev })?;
    let trial = (identity + c * dt) * f_prev;
    let det_trial = trial.determinant();
    if !(det_trial.abs() > crate::math::SINGULAR_DET) {
        return Err(MathError::Singular { det: det_trial }.into());
    }
    let (r, _u) = polar_decompose_f64(&trial)?;
    let projected = r * beta + trial * ((1.0 - beta) / det_trial);
    let c_new = (projected * f_prev_inv - identity) / dt;
    Ok(c_new.cast::<Real>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{Quat, Vec3};
    use approx::assert_relative_eq;

    #[test]
    fn lame_conversion() {
        assert_eq!(lame_from_young_poisson(1.0, 0.0).unwrap(), (0.5, 0.0));
        let (mu, lambda) = lame_from_young_poisson(1e4, 0.3).unwrap();
        assert!((mu - 3846.15).abs() < 0.01);
        assert!((lambda - 5769.23).abs() < 0.01);
        assert!(matches!(
            lame_from_young_poisson(3.0, 0.5),
            Err(MaterialError::BadPoissonRatio(_))
        ));
        let (_, lambda) = lame_from_young_poisson(3.0, 0.4999).unwrap();
        assert!(lambda > 1e3);
        assert!(lame_from_young_poisson(-1.0, 0.2).is_err());
    }

    #[test]
    fn stress_free_states() {
        let s = neo_hookean_cauchy_stress(&Mat3::identity(), 100.0, 50.0).unwrap();
        assert_eq!(s, Mat3::zeros());
        let r = *Quat::from_euler_angles(0.4, 0.2, -0.9).to_rotation_matrix().matrix();
        let s = neo_hookean_cauchy_stress(&r, 100.0, 50.0).unwrap();
        assert!(s.abs().max() < 1e-4 * 100.0);
    }

    #[test]
    fn inverted_gradient() {
        let f = Mat3::from_diagonal(&Vec3::new(-1.0, 1.0, 1.0));
        assert!(matches!(
            neo_hookean_cauchy_stress(&f, 1.0, 1.0),
            Err(MaterialError::Inverted(_))
        ));
        let (s, inverted) = neo_hookean_cauchy_stress_clamped(&f, 1.0, 1.0);
        assert!(inverted);
        assert!(s.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn projection_fixed_point() {
        for beta in [0.0, 0.5, 1.0] {
            let c = corotational_project(&Mat3::identity(), &Mat3::zeros(), 0.01, beta).unwrap();
            assert!(c.abs().max() < 1e-6);
        }
    }

    #[test]
    fn projection_keeps_rotation() {
        let dt = 0.02;
        // Exact rotation as the trial gradient: C dt = R - I.
        let r = *Quat::from_euler_angles(0.0, 0.0, 0.05).to_rotation_matrix().matrix();
        let c = (r - Mat3::identity()) / dt;
        let c_new = corotational_project(&Mat3::identity(), &c, dt, 1.0).unwrap();
        assert_relative_eq!(c_new * dt, c * dt, epsilon = 1e-5);
    }

    #[test]
    fn projection_removes_stretch() {
        let dt = 0.02;
        let c = Mat3::from_diagonal(&Vec3::new(0.1, 0.0, 0.0)) / dt;
        let c_new = corotational_project(&Mat3::identity(), &c, dt, 1.0).unwrap();
        assert_relative_eq!(c_new, Mat3::zeros(), epsilon = 1e-4);
    }

    #[test]
    fn projection_rejects_singular_prev() {
        let f = Mat3::zeros();
        assert!(corotational_project(&f, &Mat3::zeros(), 0.01, 0.5).is_err());
    }

    #[test]
    fn material_validation() {
        assert!(Material::new(MaterialKind::NeoHookean, 0.0, 1.0, 0.5).is_err());
        assert!(Material::new(MaterialKind::CorotationalPb, 1.0, 1.0, 1.5).is_err());
        assert!(Material::new(MaterialKind::CorotationalPb, 1.0, 0.0, 1.0).is_ok());
    }
}
