//! Return mappings in Hencky-strain space.
//!
//! Every mapping takes the SVD of a trial elastic deformation gradient,
//! works on the Hencky strain `ε = log Σ`, and rebuilds `Fᵉ = U exp(ε) Vᵀ`.
//! For the isotropic St. Venant–Kirchhoff law the deviatoric Kirchhoff
//! stress is `s = 2μ dev(ε)`, so scaling `dev(ε)` scales `s` by the same
//! factor and strain-space radial returns coincide with stress-space ones.

use serde::{Deserialize, Serialize};

use crate::constitutive::{svd_rotation_safe, Mat3, StressError, SvdDecomposition, Vec3};

/// `√(2/3)`, the von Mises radius factor.
pub const SQRT_2_3: f64 = 0.816_496_580_927_726;

/// Residual yield strength of the damage law as a fraction of `σ_Y0`.
pub const DAMAGE_FLOOR_FRACTION: f64 = 0.01;

/// Default linear softening slope of the damage law.
pub const DEFAULT_SOFTENING: f64 = 5.0;

/// Trial elastic state handed to a return mapping.
#[derive(Debug, Clone, Copy)]
pub struct TrialState {
    pub fe: Mat3,
    pub svd: SvdDecomposition,
    /// Hencky strain `log Σ` in principal axes.
    pub hencky: Vec3,
    pub dt: f64,
    pub plastic_strain: f64,
}

impl TrialState {
    /// Decomposes `fe`. Fails if `fe` is not finite or not strictly
    /// orientation-preserving.
    pub fn new(fe: Mat3, dt: f64, plastic_strain: f64) -> Result<Self, StressError> {
        let svd = svd_rotation_safe(&fe)?;
        Self::from_svd(fe, svd, dt, plastic_strain)
    }

    pub fn from_svd(
        fe: Mat3,
        svd: SvdDecomposition,
        dt: f64,
        plastic_strain: f64,
    ) -> Result<Self, StressError> {
        if !(svd.sigma.min() > 0.0) {
            return Err(StressError::SingularF(svd.sigma.product()));
        }
        Ok(TrialState {
            fe,
            svd,
            hencky: svd.sigma.map(f64::ln),
            dt,
            plastic_strain,
        })
    }

    pub fn volumetric(&self) -> f64 {
        self.hencky.sum()
    }

    pub fn deviatoric(&self) -> Vec3 {
        self.hencky - Vec3::repeat(self.volumetric() / 3.0)
    }

    /// Norm of the deviatoric Kirchhoff stress `‖s‖ = 2μ‖dev ε‖`.
    pub fn deviatoric_stress_norm(&self, mu: f64) -> f64 {
        2.0 * mu * self.deviatoric().norm()
    }

    fn unchanged(&self, yield_value: f64) -> YieldResult {
        YieldResult {
            fe: self.fe,
            hencky: self.hencky,
            plastic_strain: self.plastic_strain,
            yield_value,
        }
    }

    fn projected(&self, hencky: Vec3, plastic_increment: f64, yield_value: f64) -> YieldResult {
        YieldResult {
            fe: reconstruct_fe(&self.svd, &hencky),
            hencky,
            plastic_strain: self.plastic_strain + plastic_increment,
            yield_value,
        }
    }

    /// Hencky strain with the deviatoric part rescaled to norm `target`.
    fn with_deviatoric_norm(&self, target: f64) -> Vec3 {
        let dev = self.deviatoric();
        let norm = dev.norm();
        let mean = Vec3::repeat(self.volumetric() / 3.0);
        if norm == 0.0 {
            return self.hencky;
        }
        mean + dev * (target / norm)
    }
}

/// Outcome of a return mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YieldResult {
    pub fe: Mat3,
    /// Hencky strain of the returned state in the trial's principal axes.
    pub hencky: Vec3,
    pub plastic_strain: f64,
    /// Yield function evaluated on the returned state; `≤ 0` means admissible.
    pub yield_value: f64,
}

/// `Fᵉ = U diag(exp ε) Vᵀ`.
pub fn reconstruct_fe(svd: &SvdDecomposition, hencky: &Vec3) -> Mat3 {
    svd.u * Mat3::from_diagonal(&hencky.map(f64::exp)) * svd.v.transpose()
}

/// Purely elastic materials: nothing evolves and the yield function is `−1`.
pub fn return_map_identity(trial: &TrialState) -> YieldResult {
    trial.unchanged(-1.0)
}

/// Radial return onto the von Mises cylinder `‖s‖ = √(2/3) σ_Y`.
pub fn return_map_von_mises(trial: &TrialState, mu: f64, yield_stress: f64) -> YieldResult {
    let radius = SQRT_2_3 * yield_stress;
    let s_norm = trial.deviatoric_stress_norm(mu);
    let f = s_norm - radius;
    if f < 0.0 {
        return trial.unchanged(f);
    }
    let target = radius / (2.0 * mu);
    let dev_norm = trial.deviatoric().norm();
    let hencky = trial.with_deviatoric_norm(target);
    let out_norm = 2.0 * mu * (hencky - Vec3::repeat(hencky.sum() / 3.0)).norm();
    trial.projected(hencky, dev_norm - target, out_norm - radius)
}

/// Damage law `σ_Y(εᵖ) = max(σ_Y0 (1 − H εᵖ), 0.01 σ_Y0)`.
pub fn damaged_yield_stress(yield_stress0: f64, softening: f64, plastic_strain: f64) -> f64 {
    (yield_stress0 * (1.0 - softening * plastic_strain))
        .max(DAMAGE_FLOOR_FRACTION * yield_stress0)
}

/// von Mises return with linear softening.
///
/// The plastic increment `Δγ` is solved consistently so that the returned
/// state sits exactly on the surface of the *updated* yield stress
/// `σ_Y(εᵖ + Δγ)`.
pub fn return_map_von_mises_damage(
    trial: &TrialState,
    mu: f64,
    yield_stress0: f64,
    softening: f64,
) -> YieldResult {
    let sigma = damaged_yield_stress(yield_stress0, softening, trial.plastic_strain);
    let dev_norm = trial.deviatoric().norm();
    let s_norm = 2.0 * mu * dev_norm;
    let f = s_norm - SQRT_2_3 * sigma;
    if f < 0.0 {
        return trial.unchanged(f);
    }
    let floor = DAMAGE_FLOOR_FRACTION * yield_stress0;
    let on_slope = sigma > floor;
    let slope = if on_slope { SQRT_2_3 * yield_stress0 * softening } else { 0.0 };
    let denom = 2.0 * mu - slope;
    let mut gamma = if denom > 0.0 { f / denom } else { f64::INFINITY };
    if !on_slope
        || damaged_yield_stress(yield_stress0, softening, trial.plastic_strain + gamma) <= floor
    {
        gamma = (s_norm - SQRT_2_3 * floor) / (2.0 * mu);
    }
    let gamma = gamma.min(dev_norm);
    let target = dev_norm - gamma;
    let hencky = trial.with_deviatoric_norm(target);
    let new_sigma = damaged_yield_stress(yield_stress0, softening, trial.plastic_strain + gamma);
    trial.projected(hencky, gamma, 2.0 * mu * target - SQRT_2_3 * new_sigma)
}

/// Viscous regularisation factor `η / (2μΔt)`.
fn relaxation_ratio(mu: f64, eta: f64, dt: f64) -> f64 {
    eta / (2.0 * mu * dt)
}

/// Shared rate-dependent radial relaxation:
/// `s = s_trial − y/(1 + η/(2μΔt)) · s_trial/‖s_trial‖` with overstress
/// `y = ‖s_trial‖ − √(2/3)σ_Y`.
///
/// The returned state leaves overstress `y·r/(1+r)`; the reported yield value
/// is the rate-regularised function `‖s‖ − √(2/3)σ_Y − r‖s_trial − s‖`,
/// which the update zeroes.
fn viscous_radial_return(trial: &TrialState, mu: f64, yield_stress: f64, eta: f64) -> YieldResult {
    let radius = SQRT_2_3 * yield_stress;
    let s_norm = trial.deviatoric_stress_norm(mu);
    let overstress = s_norm - radius;
    if overstress <= 0.0 {
        return trial.unchanged(overstress);
    }
    let ratio = relaxation_ratio(mu, eta, trial.dt);
    let relaxed = s_norm - overstress / (1.0 + ratio);
    let target = relaxed / (2.0 * mu);
    let dev_norm = trial.deviatoric().norm();
    let hencky = trial.with_deviatoric_norm(target);
    let out_norm = 2.0 * mu * (hencky - Vec3::repeat(hencky.sum() / 3.0)).norm();
    let regularised = out_norm - radius - ratio * (s_norm - out_norm);
    trial.projected(hencky, dev_norm - target, regularised)
}

/// Viscoplastic (foam) return mapping.
pub fn return_map_viscoplastic_foam(
    trial: &TrialState,
    mu: f64,
    yield_stress: f64,
    eta: f64,
) -> YieldResult {
    viscous_radial_return(trial, mu, yield_stress, eta)
}

/// Herschel–Bulkley viscoplastic fluid return mapping.
pub fn return_map_herschel_bulkley(
    trial: &TrialState,
    mu: f64,
    yield_stress: f64,
    eta: f64,
) -> YieldResult {
    viscous_radial_return(trial, mu, yield_stress, eta)
}

/// Cone slope of the cohesionless Drucker–Prager surface for a friction
/// angle in degrees: `α = √(2/3) · 2 sin φ / (3 − sin φ)`.
pub fn drucker_prager_alpha(friction_angle_deg: f64) -> f64 {
    let s = friction_angle_deg.to_radians().sin();
    SQRT_2_3 * 2.0 * s / (3.0 - s)
}

/// Drucker–Prager yield value `‖s‖ + α tr τ` (cohesion `k = 0`) of a Hencky
/// strain.
pub fn drucker_prager_yield(hencky: &Vec3, mu: f64, lambda: f64, alpha: f64) -> f64 {
    let tr = hencky.sum();
    let dev = hencky - Vec3::repeat(tr / 3.0);
    2.0 * mu * dev.norm() + alpha * (2.0 * mu + 3.0 * lambda) * tr
}

/// Cohesionless Drucker–Prager projection (sand).
///
/// Expansion projects to the cone apex (`ε = 0`); otherwise the deviatoric
/// strain is scaled onto the cone.
pub fn return_map_drucker_prager(
    trial: &TrialState,
    mu: f64,
    lambda: f64,
    friction_angle_deg: f64,
) -> YieldResult {
    let alpha = drucker_prager_alpha(friction_angle_deg);
    let tr = trial.volumetric();
    let f = drucker_prager_yield(&trial.hencky, mu, lambda, alpha);
    if tr > 0.0 {
        let hencky = Vec3::zeros();
        return trial.projected(hencky, trial.hencky.norm(), 0.0);
    }
    if f < 0.0 {
        return trial.unchanged(f);
    }
    let target = (-alpha * (2.0 * mu + 3.0 * lambda) * tr / (2.0 * mu)).max(0.0);
    let dev_norm = trial.deviatoric().norm();
    let hencky = trial.with_deviatoric_norm(target);
    let f_out = drucker_prager_yield(&hencky, mu, lambda, alpha);
    trial.projected(hencky, (dev_norm - target).max(0.0), f_out)
}

/// Return mapping with its material constants bound, as used per particle
/// by the solver. Moduli are in simulation units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Plasticity {
    Identity,
    VonMises {
        mu: f64,
        yield_stress: f64,
    },
    VonMisesDamage {
        mu: f64,
        yield_stress: f64,
        softening: f64,
    },
    Viscoplastic {
        mu: f64,
        yield_stress: f64,
        eta: f64,
    },
    DruckerPrager {
        mu: f64,
        lambda: f64,
        friction_angle: f64,
    },
    HerschelBulkley {
        mu: f64,
        yield_stress: f64,
        eta: f64,
    },
}

impl Plasticity {
    pub fn apply(&self, trial: &TrialState) -> YieldResult {
        match *self {
            Plasticity::Identity => return_map_identity(trial),
            Plasticity::VonMises { mu, yield_stress } => {
                return_map_von_mises(trial, mu, yield_stress)
            }
            Plasticity::VonMisesDamage {
                mu,
                yield_stress,
                softening,
            } => return_map_von_mises_damage(trial, mu, yield_stress, softening),
            Plasticity::Viscoplastic {
                mu,
                yield_stress,
                eta,
            } => return_map_viscoplastic_foam(trial, mu, yield_stress, eta),
            Plasticity::DruckerPrager {
                mu,
                lambda,
                friction_angle,
            } => return_map_drucker_prager(trial, mu, lambda, friction_angle),
            Plasticity::HerschelBulkley {
                mu,
                yield_stress,
                eta,
            } => return_map_herschel_bulkley(trial, mu, yield_stress, eta),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Plasticity::Identity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag_trial(h: [f64; 3], dt: f64) -> TrialState {
        let fe = Mat3::from_diagonal(&Vec3::from(h).map(f64::exp));
        TrialState::new(fe, dt, 0.0).unwrap()
    }

    fn dev_norm(h: &Vec3) -> f64 {
        (h - Vec3::repeat(h.sum() / 3.0)).norm()
    }

    #[test]
    fn identity_is_bit_exact() {
        let fe = Mat3::new(1.1, 0.2, 0.0, -0.1, 0.9, 0.05, 0.0, 0.0, 1.3);
        let t = TrialState::new(fe, 1e-3, 0.4).unwrap();
        let r = return_map_identity(&t);
        assert_eq!(r.fe, fe);
        assert_eq!(r.plastic_strain, 0.4);
        assert_eq!(r.yield_value, -1.0);
    }

    #[test]
    fn von_mises_inside_is_unchanged() {
        let t = diag_trial([0.01, -0.005, -0.005], 1e-3);
        let r = return_map_von_mises(&t, 1.0, 1.0);
        assert_eq!(r.fe, t.fe);
        assert!(r.yield_value < 0.0);
    }

    #[test]
    fn von_mises_radial_return_arithmetic() {
        // dev ε = c·(2,−1,−1), ‖s‖ = 2μ√6·c.
        let c = 0.1;
        let (mu, sy) = (1.0, 0.2);
        let t = diag_trial([2.0 * c, -c, -c], 1e-3);
        let r = return_map_von_mises(&t, mu, sy);
        let s_out = 2.0 * mu * dev_norm(&r.hencky);
        assert_relative_eq!(s_out, SQRT_2_3 * sy, max_relative = 1e-12);
        assert_relative_eq!(SQRT_2_3, 0.8165, epsilon = 1e-4);
        let dir = r.hencky / dev_norm(&r.hencky);
        assert_relative_eq!(dir, Vec3::new(2.0, -1.0, -1.0) / 6f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(r.plastic_strain, 6f64.sqrt() * c - SQRT_2_3 * sy / 2.0, epsilon = 1e-12);
        // Output strain recovered from the rebuilt Fᵉ matches the target.
        let back = TrialState::new(r.fe, 1e-3, 0.0).unwrap();
        assert_relative_eq!(dev_norm(&back.hencky), SQRT_2_3 * sy / (2.0 * mu), max_relative = 1e-8);
    }

    #[test]
    fn von_mises_huge_yield_never_reached() {
        let t = diag_trial([0.3, -0.2, 0.05], 1e-3);
        assert_eq!(return_map_von_mises(&t, 1e6, 1e12).fe, t.fe);
    }

    #[test]
    fn damage_without_softening_matches_von_mises() {
        let t = diag_trial([0.3, -0.1, -0.15], 1e-3);
        let a = return_map_von_mises(&t, 2.0, 0.5);
        let b = return_map_von_mises_damage(&t, 2.0, 0.5, 0.0);
        assert_relative_eq!(a.fe, b.fe, max_relative = 1e-12);
        assert_relative_eq!(a.plastic_strain, b.plastic_strain, max_relative = 1e-12);
    }

    #[test]
    fn damage_first_yield_uses_initial_stress() {
        assert_eq!(damaged_yield_stress(3.0, 5.0, 0.0), 3.0);
        assert_eq!(damaged_yield_stress(3.0, 5.0, 10.0), 0.03);
    }

    #[test]
    fn damage_yield_stress_sequence_is_non_increasing() {
        // Simple shear applied substep after substep.
        let (mu, sy0, h) = (10.0, 1.0, DEFAULT_SOFTENING);
        let dt = 1e-3;
        let mut fe = Mat3::identity();
        let mut ep = 0.0;
        let mut prev = damaged_yield_stress(sy0, h, ep);
        let mut yielded = 0;
        for _ in 0..100 {
            let shear = Mat3::new(1.0, 0.02, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
            let t = TrialState::new(shear * fe, dt, ep).unwrap();
            let r = return_map_von_mises_damage(&t, mu, sy0, h);
            assert!(r.yield_value <= 1e-9 * sy0);
            if r.plastic_strain > ep {
                yielded += 1;
            }
            fe = r.fe;
            ep = r.plastic_strain;
            let s = damaged_yield_stress(sy0, h, ep);
            assert!(s <= prev && s >= DAMAGE_FLOOR_FRACTION * sy0);
            prev = s;
        }
        assert!(yielded > 50);
        assert!(prev < sy0);
    }

    #[test]
    fn foam_limits() {
        let t = diag_trial([0.2, -0.1, -0.1], 1e-2);
        let vm = return_map_von_mises(&t, 1.0, 0.1);
        let foam = return_map_viscoplastic_foam(&t, 1.0, 0.1, 1e-9);
        assert_relative_eq!(foam.hencky, vm.hencky, max_relative = 1e-6);
        let stiff = return_map_viscoplastic_foam(&t, 1.0, 0.1, 1e6);
        assert_relative_eq!(dev_norm(&stiff.hencky), dev_norm(&t.hencky), max_relative = 1e-6);
        let below = diag_trial([0.01, -0.005, -0.005], 1e-3);
        assert_eq!(return_map_viscoplastic_foam(&below, 1.0, 1.0, 0.5).fe, below.fe);
    }

    #[test]
    fn herschel_bulkley_zero_yield_is_viscous_relaxation() {
        let (mu, eta, dt) = (2.0, 0.3, 0.05);
        let t = diag_trial([0.2, -0.05, -0.15], dt);
        let r = return_map_herschel_bulkley(&t, mu, 0.0, eta);
        let ratio = eta / (2.0 * mu * dt);
        let factor = 1.0 - 1.0 / (1.0 + ratio);
        assert_relative_eq!(dev_norm(&r.hencky), factor * dev_norm(&t.hencky), max_relative = 1e-12);
        assert_relative_eq!(r.hencky.sum(), t.hencky.sum(), epsilon = 1e-14);
    }

    #[test]
    fn herschel_bulkley_below_yield_holds_shape() {
        let t = diag_trial([0.01, -0.005, -0.005], 1e-3);
        assert_eq!(return_map_herschel_bulkley(&t, 1.0, 10.0, 0.5).fe, t.fe);
        let t = diag_trial([0.2, -0.1, -0.1], 1e-2);
        let vm = return_map_von_mises(&t, 1.0, 0.1);
        let hb = return_map_herschel_bulkley(&t, 1.0, 0.1, 1e-9);
        assert_relative_eq!(hb.hencky, vm.hencky, max_relative = 1e-6);
    }

    #[test]
    fn drucker_prager_cases() {
        let (mu, lambda) = (1.0, 1.5);
        // (i) compressive, inside the cone.
        let t = diag_trial([-0.1, -0.1, -0.09], 1e-3);
        assert_eq!(return_map_drucker_prager(&t, mu, lambda, 35.0).fe, t.fe);
        // (ii) expansion goes to the apex.
        let t = diag_trial([0.05, 0.02, 0.01], 1e-3);
        let r = return_map_drucker_prager(&t, mu, lambda, 35.0);
        assert_relative_eq!(r.fe, t.svd.rotation(), epsilon = 1e-14);
        assert_eq!(r.hencky, Vec3::zeros());
        assert!(r.yield_value <= 0.0);
        // (iii) shear-dominant compressive state lands on the cone.
        let t = diag_trial([0.2, -0.15, -0.1], 1e-3);
        let r = return_map_drucker_prager(&t, mu, lambda, 35.0);
        let tau_norm = 2.0 * mu * t.hencky.norm() + lambda * t.volumetric().abs() * 3f64.sqrt();
        assert!(r.yield_value.abs() <= 1e-6 * tau_norm);
        assert_relative_eq!(r.hencky.sum(), t.hencky.sum(), epsilon = 1e-14);
    }

    #[test]
    fn reconstruct_round_trip() {
        let fe = Mat3::new(1.1, 0.2, 0.0, -0.1, 0.9, 0.05, 0.01, 0.0, 1.3);
        let t = TrialState::new(fe, 1e-3, 0.0).unwrap();
        assert_relative_eq!(reconstruct_fe(&t.svd, &t.hencky), fe, epsilon = 1e-9);
        assert_relative_eq!(reconstruct_fe(&t.svd, &Vec3::zeros()), t.svd.rotation(), epsilon = 1e-15);
    }

    #[test]
    fn alpha_is_increasing_in_friction() {
        let a: Vec<f64> = [27.0, 36.0, 45.0].iter().map(|&d| drucker_prager_alpha(d)).collect();
        assert!(a[0] < a[1] && a[1] < a[2]);
        let s: f64 = 30f64.to_radians().sin();
        assert_relative_eq!(drucker_prager_alpha(30.0), SQRT_2_3 * 2.0 * s / (3.0 - s));
    }
}
