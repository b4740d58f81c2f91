//! Elastic stress laws and the rotation-safe SVD they are built on.
//!
//! Three laws are provided:
//!
//! * fixed corotated, `P = 2μ(F − R) + λJ(J − 1)F⁻ᵀ` (first Piola stress),
//! * St. Venant–Kirchhoff on Hencky strain, `τ = U[2με + λ tr(ε) I]Uᵀ` with
//!   `ε = log Σ` (Kirchhoff stress),
//! * compressible neo-Hookean for weakly compressible fluids,
//!   `P = μJ^{-2/3}(F − J^{-1/3}R) + (κ/2)(J² − 1)F⁻ᵀ`.
//!
//! The solver consumes Kirchhoff stress `τ = P Fᵀ`; [`kirchhoff_from_piola`]
//! and [`piola_from_kirchhoff`] convert between the two.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::material::LameCoefficients;

pub type Mat3 = Matrix3<f64>;
pub type Vec3 = Vector3<f64>;

/// Determinant (or smallest singular value) below which `F⁻ᵀ`/`log Σ` are
/// treated as undefined.
pub const SINGULAR_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum StressError {
    #[error("deformation gradient has non-finite entries")]
    NonFinite,
    #[error("deformation gradient is singular or inverted (det = {0:e})")]
    SingularF(f64),
}

/// `F = U Σ Vᵀ` with `det U = det V = +1`.
///
/// Singular values are sorted by decreasing magnitude; a reflection is folded
/// into the sign of the last one, so `Σ₃ < 0` exactly when `det F < 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdDecomposition {
    pub u: Mat3,
    pub sigma: Vec3,
    pub v: Mat3,
}

impl SvdDecomposition {
    pub fn reconstruct(&self) -> Mat3 {
        self.u * Mat3::from_diagonal(&self.sigma) * self.v.transpose()
    }

    /// Closest rotation, `R = U Vᵀ`.
    pub fn rotation(&self) -> Mat3 {
        self.u * self.v.transpose()
    }
}

/// Rotation-safe SVD of a 3×3 matrix.
pub fn svd_rotation_safe(f: &Mat3) -> Result<SvdDecomposition, StressError> {
    if f.iter().any(|x| !x.is_finite()) {
        return Err(StressError::NonFinite);
    }
    let off_diagonal_zero = (0..3).all(|i| (0..3).all(|j| i == j || f[(i, j)] == 0.0));
    if off_diagonal_zero {
        return Ok(diagonal_svd(f));
    }
    let svd = f.svd_unordered(true, true);
    let mut u = svd.u.expect("requested U");
    let mut v = svd.v_t.expect("requested V").transpose();
    let mut sigma = svd.singular_values;

    // Sort descending, permuting the singular vectors alongside.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    if order != [0, 1, 2] {
        let (u0, v0, s0) = (u, v, sigma);
        for (dst, &src) in order.iter().enumerate() {
            u.set_column(dst, &u0.column(src));
            v.set_column(dst, &v0.column(src));
            sigma[dst] = s0[src];
        }
    }

    if u.determinant() < 0.0 {
        u.column_mut(2).neg_mut();
        sigma[2] = -sigma[2];
    }
    if v.determinant() < 0.0 {
        v.column_mut(2).neg_mut();
        sigma[2] = -sigma[2];
    }
    Ok(SvdDecomposition { u, sigma, v })
}

/// Exact decomposition of a diagonal matrix: signed permutations only.
fn diagonal_svd(f: &Mat3) -> SvdDecomposition {
    let d = f.diagonal();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| d[b].abs().total_cmp(&d[a].abs()));
    let mut u = Mat3::zeros();
    let mut v = Mat3::zeros();
    let mut sigma = Vec3::zeros();
    for (dst, &src) in order.iter().enumerate() {
        // V picks axis `src`; U carries the sign of the entry.
        v[(src, dst)] = 1.0;
        u[(src, dst)] = if d[src] < 0.0 { -1.0 } else { 1.0 };
        sigma[dst] = d[src].abs();
    }
    if u.determinant() < 0.0 {
        u.column_mut(2).neg_mut();
        sigma[2] = -sigma[2];
    }
    if v.determinant() < 0.0 {
        v.column_mut(2).neg_mut();
        sigma[2] = -sigma[2];
    }
    SvdDecomposition { u, sigma, v }
}

fn inverse_transpose(f: &Mat3) -> Result<Mat3, StressError> {
    let j = f.determinant();
    if !(j > SINGULAR_EPS) {
        return Err(StressError::SingularF(j));
    }
    Ok(f.try_inverse().ok_or(StressError::SingularF(j))?.transpose())
}

/// Fixed corotated first Piola stress.
pub fn stress_fixed_corotated(f: &Mat3, lame: LameCoefficients) -> Result<Mat3, StressError> {
    let f_inv_t = inverse_transpose(f)?;
    let j = f.determinant();
    let r = svd_rotation_safe(f)?.rotation();
    Ok((f - r) * (2.0 * lame.mu) + f_inv_t * (lame.lambda * j * (j - 1.0)))
}

/// Fixed corotated Kirchhoff stress `P Fᵀ`, evaluated without inverting `F`.
pub fn kirchhoff_fixed_corotated(svd: &SvdDecomposition, lame: LameCoefficients) -> Mat3 {
    let f = svd.reconstruct();
    let j = svd.sigma.product();
    (f - svd.rotation()) * f.transpose() * (2.0 * lame.mu)
        + Mat3::identity() * (lame.lambda * j * (j - 1.0))
}

/// Rotation factor of the polar decomposition `F = R S` by scaled Newton
/// iteration. Cheaper than a full SVD when `F` is close to a rotation;
/// `None` when `det F ≤ 1e-12` or the iteration fails to settle.
pub fn polar_rotation(f: &Mat3) -> Option<Mat3> {
    let mut x = *f;
    for _ in 0..32 {
        let det = x.determinant();
        if !(det > SINGULAR_EPS) {
            return None;
        }
        let gamma = det.powf(-1.0 / 3.0);
        let inv_t = x.try_inverse()?.transpose();
        let next = (x * gamma + inv_t / gamma) * 0.5;
        let change = (next - x).norm();
        x = next;
        if change <= 1e-13 {
            return Some((x + x.try_inverse()?.transpose()) * 0.5);
        }
    }
    None
}

/// Fixed corotated Kirchhoff stress from `F` and its polar rotation.
pub fn kirchhoff_fixed_corotated_polar(f: &Mat3, r: &Mat3, lame: LameCoefficients) -> Mat3 {
    let j = f.determinant();
    (f - r) * f.transpose() * (2.0 * lame.mu) + Mat3::identity() * (lame.lambda * j * (j - 1.0))
}

/// Kirchhoff stress of St. Venant–Kirchhoff elasticity on Hencky strain.
pub fn stress_stvk_hencky(f: &Mat3, lame: LameCoefficients) -> Result<Mat3, StressError> {
    let svd = svd_rotation_safe(f)?;
    let smallest = svd.sigma.min();
    if !(smallest > SINGULAR_EPS) {
        return Err(StressError::SingularF(svd.sigma.product()));
    }
    Ok(kirchhoff_stvk_hencky(&svd, lame))
}

/// Same as [`stress_stvk_hencky`] for a decomposition with positive `Σ`.
pub fn kirchhoff_stvk_hencky(svd: &SvdDecomposition, lame: LameCoefficients) -> Mat3 {
    let eps = svd.sigma.map(f64::ln);
    let tr = eps.sum();
    let diag = eps * (2.0 * lame.mu) + Vec3::repeat(lame.lambda * tr);
    svd.u * Mat3::from_diagonal(&diag) * svd.u.transpose()
}

/// Compressible neo-Hookean first Piola stress.
pub fn stress_neo_hookean_fluid(f: &Mat3, mu: f64, kappa: f64) -> Result<Mat3, StressError> {
    let f_inv_t = inverse_transpose(f)?;
    let j = f.determinant();
    let r = svd_rotation_safe(f)?.rotation();
    let shear = if mu == 0.0 {
        Mat3::zeros()
    } else {
        (f - r * j.powf(-1.0 / 3.0)) * (mu / j.powf(2.0 / 3.0))
    };
    Ok(shear + f_inv_t * (0.5 * kappa * (j * j - 1.0)))
}

/// Neo-Hookean Kirchhoff stress `P Fᵀ`.
pub fn kirchhoff_neo_hookean_fluid(svd: &SvdDecomposition, mu: f64, kappa: f64) -> Mat3 {
    let j = svd.sigma.product();
    let pressure = Mat3::identity() * (0.5 * kappa * (j * j - 1.0));
    if mu == 0.0 {
        return pressure;
    }
    let f = svd.reconstruct();
    (f - svd.rotation() * j.powf(-1.0 / 3.0)) * f.transpose() * (mu / j.powf(2.0 / 3.0)) + pressure
}

pub fn kirchhoff_from_piola(p: &Mat3, f: &Mat3) -> Mat3 {
    p * f.transpose()
}

pub fn piola_from_kirchhoff(tau: &Mat3, f: &Mat3) -> Result<Mat3, StressError> {
    Ok(tau * inverse_transpose(f)?)
}

/// Deviatoric part of a symmetric tensor.
pub fn dev(m: &Mat3) -> Mat3 {
    m - Mat3::identity() * (m.trace() / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Rotation3, Unit};

    fn lame(mu: f64, lambda: f64) -> LameCoefficients {
        LameCoefficients { mu, lambda }
    }

    fn rot(axis: [f64; 3], angle: f64) -> Mat3 {
        *Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::from(axis)), angle).matrix()
    }

    #[test]
    fn polar_rotation_matches_svd() {
        let f = rot([0.3, -0.5, 0.8], 0.7) * Mat3::new(1.2, 0.1, 0.0, 0.1, 0.9, 0.05, 0.0, 0.05, 1.1);
        let r = polar_rotation(&f).unwrap();
        assert_relative_eq!(r, svd_rotation_safe(&f).unwrap().rotation(), epsilon = 1e-12);
        let l = lame(3.0, 2.0);
        assert_relative_eq!(
            kirchhoff_fixed_corotated_polar(&f, &r, l),
            kirchhoff_fixed_corotated(&svd_rotation_safe(&f).unwrap(), l),
            epsilon = 1e-11
        );
        assert!(polar_rotation(&Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0))).is_none());
    }

    #[test]
    fn svd_identity() {
        let s = svd_rotation_safe(&Mat3::identity()).unwrap();
        assert_eq!(s.u, Mat3::identity());
        assert_eq!(s.v, Mat3::identity());
        assert_eq!(s.sigma, Vec3::new(1.0, 1.0, 1.0));
    }

    #[test]
    fn svd_rotation() {
        let r = rot([1.0, 2.0, -0.5], 0.7);
        let s = svd_rotation_safe(&r).unwrap();
        assert_relative_eq!(s.sigma, Vec3::new(1.0, 1.0, 1.0), epsilon = 1e-12);
        assert_relative_eq!(s.rotation(), r, epsilon = 1e-12);
    }

    #[test]
    fn svd_diagonal() {
        let s = svd_rotation_safe(&Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 0.5))).unwrap();
        assert_eq!(s.sigma, Vec3::new(2.0, 1.0, 0.5));
        assert_eq!(s.u, Mat3::identity());
        assert_eq!(s.v, Mat3::identity());
        let s = svd_rotation_safe(&Mat3::from_diagonal(&Vec3::new(0.5, -3.0, 1.0))).unwrap();
        assert_eq!(s.sigma, Vec3::new(3.0, 1.0, -0.5));
        assert_relative_eq!(s.reconstruct(), Mat3::from_diagonal(&Vec3::new(0.5, -3.0, 1.0)));
        assert_eq!(s.u.determinant(), 1.0);
        assert_eq!(s.v.determinant(), 1.0);
    }

    #[test]
    fn svd_reflection_folds_into_last_value() {
        let f = rot([0.3, 1.0, 0.2], 1.1) * Mat3::from_diagonal(&Vec3::new(1.5, -0.8, 1.1));
        let s = svd_rotation_safe(&f).unwrap();
        assert!(s.sigma[2] < 0.0);
        assert!(s.sigma[0] >= s.sigma[1] && s.sigma[1] >= s.sigma[2]);
        assert_relative_eq!(s.u.determinant(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.v.determinant(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.reconstruct(), f, epsilon = 1e-12);
    }

    #[test]
    fn svd_rejects_nan() {
        let mut f = Mat3::identity();
        f[(1, 2)] = f64::NAN;
        assert_eq!(svd_rotation_safe(&f).unwrap_err(), StressError::NonFinite);
    }

    #[test]
    fn corotated_examples() {
        assert_eq!(
            stress_fixed_corotated(&Mat3::identity(), lame(3.0, 5.0)).unwrap(),
            Mat3::zeros()
        );
        let r = rot([0.0, 1.0, 1.0], 0.4);
        assert!(stress_fixed_corotated(&r, lame(3.0, 5.0)).unwrap().norm() < 1e-10);
        let f = Mat3::from_diagonal(&Vec3::new(1.1, 1.0, 1.0));
        let p = stress_fixed_corotated(&f, lame(1.0, 1.0)).unwrap();
        assert_relative_eq!(p, Mat3::from_diagonal(&Vec3::new(0.3, 0.11, 0.11)), epsilon = 1e-12);
        assert!(matches!(
            stress_fixed_corotated(&Mat3::zeros(), lame(1.0, 1.0)),
            Err(StressError::SingularF(_))
        ));
    }

    #[test]
    fn stvk_examples() {
        assert_eq!(
            stress_stvk_hencky(&Mat3::identity(), lame(3.0, 5.0)).unwrap(),
            Mat3::zeros()
        );
        let f = Mat3::from_diagonal(&Vec3::new(std::f64::consts::E, 1.0, 1.0));
        let tau = stress_stvk_hencky(&f, lame(1.0, 0.0)).unwrap();
        assert_relative_eq!(tau, Mat3::from_diagonal(&Vec3::new(2.0, 0.0, 0.0)), epsilon = 1e-12);
        let f = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 0.0));
        assert!(stress_stvk_hencky(&f, lame(1.0, 1.0)).is_err());
    }

    #[test]
    fn neo_hookean_examples() {
        assert_eq!(
            stress_neo_hookean_fluid(&Mat3::identity(), 2.0, 7.0).unwrap(),
            Mat3::zeros()
        );
        let c: f64 = 1.2;
        let p = stress_neo_hookean_fluid(&(Mat3::identity() * c), 0.0, 7.0).unwrap();
        let expect = 3.5 * (c.powi(6) - 1.0) / c;
        assert_relative_eq!(p, Mat3::identity() * expect, epsilon = 1e-12);
        let r = rot([1.0, 0.0, 1.0], -0.9);
        assert!(stress_neo_hookean_fluid(&r, 2.0, 7.0).unwrap().norm() < 1e-10);
    }

    #[test]
    fn kirchhoff_forms_match_piola_forms() {
        let f = rot([0.2, 0.4, 1.0], 0.3) * Mat3::new(1.1, 0.05, 0.0, 0.02, 0.95, 0.1, 0.0, -0.03, 1.02);
        let svd = svd_rotation_safe(&f).unwrap();
        let l = lame(2.0, 3.0);
        let p = stress_fixed_corotated(&f, l).unwrap();
        assert_relative_eq!(kirchhoff_fixed_corotated(&svd, l), p * f.transpose(), epsilon = 1e-12);
        let p = stress_neo_hookean_fluid(&f, 2.0, 5.0).unwrap();
        assert_relative_eq!(kirchhoff_neo_hookean_fluid(&svd, 2.0, 5.0), p * f.transpose(), epsilon = 1e-12);
        let tau = stress_stvk_hencky(&f, l).unwrap();
        let p = piola_from_kirchhoff(&tau, &f).unwrap();
        assert_relative_eq!(kirchhoff_from_piola(&p, &f), tau, epsilon = 1e-12);
    }
}
