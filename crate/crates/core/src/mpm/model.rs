//! Binds a [`MaterialParams`] to the stress law and return mapping the
//! solver evaluates per particle.

use serde::{Deserialize, Serialize};

use crate::constitutive::{
    kirchhoff_fixed_corotated, kirchhoff_neo_hookean_fluid, kirchhoff_stvk_hencky, Mat3,
    SvdDecomposition,
};
use crate::material::{
    lame_from_young_poisson, LameCoefficients, MaterialClass, MaterialError, MaterialParams, Param,
};
use crate::plasticity::{Plasticity, DEFAULT_SOFTENING};

/// Young's modulus (Pa) used for the elastic part of sand, whose parameter
/// set carries only a friction angle.
pub const SAND_YOUNGS_MODULUS: f64 = 3.537e5;
/// Poisson ratio used for the elastic part of sand.
pub const SAND_POISSON_RATIO: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ElasticModel {
    FixedCorotated(LameCoefficients),
    StvkHencky(LameCoefficients),
    NeoHookean { mu: f64, kappa: f64 },
}

impl ElasticModel {
    /// Kirchhoff stress of a state with positive singular values.
    pub fn kirchhoff(&self, svd: &SvdDecomposition) -> Mat3 {
        match *self {
            ElasticModel::FixedCorotated(l) => kirchhoff_fixed_corotated(svd, l),
            ElasticModel::StvkHencky(l) => kirchhoff_stvk_hencky(svd, l),
            ElasticModel::NeoHookean { mu, kappa } => kirchhoff_neo_hookean_fluid(svd, mu, kappa),
        }
    }

    /// P-wave modulus `λ + 2μ` (or `κ + 4μ/3`), used for stability estimates.
    pub fn p_wave_modulus(&self) -> f64 {
        match *self {
            ElasticModel::FixedCorotated(l) | ElasticModel::StvkHencky(l) => l.lambda + 2.0 * l.mu,
            ElasticModel::NeoHookean { mu, kappa } => kappa + 4.0 * mu / 3.0,
        }
    }
}

/// Everything the solver needs to know about one particle group's material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialModel {
    pub class: MaterialClass,
    pub density: f64,
    pub elastic: ElasticModel,
    pub plasticity: Plasticity,
    /// Newtonian viscosity (Pa·s, simulation units); zero for other classes.
    pub viscosity: f64,
    /// Replace `F` by `J^{1/3} I` after every substep (Newtonian fluids).
    pub reset_deviatoric: bool,
}

impl MaterialModel {
    /// Builds the model for `params`, with every pressure-like coefficient
    /// (moduli, yield stress, viscosity) multiplied by `modulus_scale`.
    pub fn new(params: &MaterialParams, modulus_scale: f64) -> Result<Self, MaterialError> {
        params.validate_fields()?;
        let s = modulus_scale;
        let young_poisson = || -> Result<LameCoefficients, MaterialError> {
            Ok(lame_from_young_poisson(
                params.require(Param::YoungsModulus)?,
                params.require(Param::PoissonRatio)?,
            )?
            .scaled(s))
        };
        let base = |elastic, plasticity| MaterialModel {
            class: params.class,
            density: params.density,
            elastic,
            plasticity,
            viscosity: 0.0,
            reset_deviatoric: false,
        };
        Ok(match params.class {
            MaterialClass::Elastic => {
                base(ElasticModel::FixedCorotated(young_poisson()?), Plasticity::Identity)
            }
            MaterialClass::Plasticine => {
                let l = young_poisson()?;
                base(
                    ElasticModel::StvkHencky(l),
                    Plasticity::VonMisesDamage {
                        mu: l.mu,
                        yield_stress: params.require(Param::YieldStress)? * s,
                        softening: DEFAULT_SOFTENING,
                    },
                )
            }
            MaterialClass::Metal => {
                let l = young_poisson()?;
                base(
                    ElasticModel::StvkHencky(l),
                    Plasticity::VonMises {
                        mu: l.mu,
                        yield_stress: params.require(Param::YieldStress)? * s,
                    },
                )
            }
            MaterialClass::Foam => {
                let l = young_poisson()?;
                base(
                    ElasticModel::StvkHencky(l),
                    Plasticity::Viscoplastic {
                        mu: l.mu,
                        yield_stress: params.require(Param::YieldStress)? * s,
                        eta: params.require(Param::PlasticViscosity)?,
                    },
                )
            }
            MaterialClass::Sand => {
                let l = lame_from_young_poisson(SAND_YOUNGS_MODULUS, SAND_POISSON_RATIO)?.scaled(s);
                base(
                    ElasticModel::StvkHencky(l),
                    Plasticity::DruckerPrager {
                        mu: l.mu,
                        lambda: l.lambda,
                        friction_angle: params.require(Param::FrictionAngle)?,
                    },
                )
            }
            MaterialClass::NewtonianFluid => {
                let mut m = base(
                    ElasticModel::NeoHookean {
                        mu: 0.0,
                        kappa: params.require(Param::BulkModulus)? * s,
                    },
                    Plasticity::Identity,
                );
                m.viscosity = params.require(Param::FluidViscosity)? * s;
                m.reset_deviatoric = true;
                m
            }
            MaterialClass::NonNewtonianFluid => {
                let mu = params.require(Param::FluidViscosity)? * s;
                let kappa = params.require(Param::BulkModulus)? * s;
                let l = LameCoefficients {
                    mu,
                    lambda: kappa - 2.0 * mu / 3.0,
                };
                base(
                    ElasticModel::StvkHencky(l),
                    Plasticity::HerschelBulkley {
                        mu,
                        yield_stress: params.require(Param::YieldStress)? * s,
                        eta: params.require(Param::PlasticViscosity)?,
                    },
                )
            }
        })
    }

    /// Elastic wave speed `√(M/ρ)` in m/s.
    pub fn wave_speed(&self) -> f64 {
        (self.elastic.p_wave_modulus() / self.density).sqrt()
    }
}
