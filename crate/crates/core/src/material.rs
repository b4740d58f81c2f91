//! Material classes, parameter sets and their admissible ranges.
//!
//! Every [`MaterialParams`] belongs to one of seven [`MaterialClass`]es. Each
//! class owns a fixed list of coefficients (its `θ_c`), and every coefficient
//! plus the common density has a closed admissible range. The range table is
//! the single source for clamping, for the optimiser's scaled coordinates and
//! for the constraint block of the initialization prompt.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while validating or converting material parameters.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaterialError {
    #[error("material class {class} requires field `{field}`")]
    MissingField { class: MaterialClass, field: Param },
    #[error("field `{field}` does not belong to material class {class}")]
    ExtraField { class: MaterialClass, field: Param },
    #[error("field `{field}` is not a finite number ({value})")]
    NonFinite { field: Param, value: f64 },
    #[error("degenerate material: Poisson ratio {nu} must lie in [0, 0.5)")]
    DegenerateMaterial { nu: f64 },
    #[error("Young's modulus must be positive, got {0}")]
    NonPositiveModulus(f64),
    #[error("scaled vector has {got} entries, class {class} expects {expected}")]
    ScaledLength {
        class: MaterialClass,
        expected: usize,
        got: usize,
    },
}

/// The seven material families, each tied to one elastic law and one
/// return mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MaterialClass {
    Elastic,
    Plasticine,
    Metal,
    Foam,
    Sand,
    NewtonianFluid,
    NonNewtonianFluid,
}

/// Elastic law used to evaluate stress for a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElasticLaw {
    FixedCorotated,
    StvkHencky,
    NeoHookeanFluid,
}

/// Plastic integration scheme applied after every substep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReturnMapping {
    Identity,
    VonMises,
    VonMisesDamage,
    Viscoplastic,
    DruckerPrager,
    HerschelBulkley,
}

impl MaterialClass {
    pub const ALL: [MaterialClass; 7] = [
        MaterialClass::Elastic,
        MaterialClass::Plasticine,
        MaterialClass::Metal,
        MaterialClass::Foam,
        MaterialClass::Sand,
        MaterialClass::NewtonianFluid,
        MaterialClass::NonNewtonianFluid,
    ];

    /// Human-readable name, as used in the initialization prompt.
    pub fn display_name(self) -> &'static str {
        match self {
            MaterialClass::Elastic => "Elastic",
            MaterialClass::Plasticine => "Plasticine",
            MaterialClass::Metal => "Metal",
            MaterialClass::Foam => "Foam",
            MaterialClass::Sand => "Sand",
            MaterialClass::NewtonianFluid => "Newtonian fluid",
            MaterialClass::NonNewtonianFluid => "Non-Newtonian fluid",
        }
    }

    /// Case-insensitive lookup that ignores spaces, hyphens and underscores,
    /// so `"non-newtonian fluid"`, `"NonNewtonian"` and `"non_newtonian_fluid"`
    /// all resolve.
    pub fn from_name(name: &str) -> Option<Self> {
        let key: String = name
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match key.as_str() {
            "elastic" => Some(MaterialClass::Elastic),
            "plasticine" => Some(MaterialClass::Plasticine),
            "metal" => Some(MaterialClass::Metal),
            "foam" => Some(MaterialClass::Foam),
            "sand" => Some(MaterialClass::Sand),
            "newtonian" | "newtonianfluid" => Some(MaterialClass::NewtonianFluid),
            "nonnewtonian" | "nonnewtonianfluid" => Some(MaterialClass::NonNewtonianFluid),
            _ => None,
        }
    }

    pub fn elastic_law(self) -> ElasticLaw {
        match self {
            MaterialClass::Elastic => ElasticLaw::FixedCorotated,
            MaterialClass::NewtonianFluid => ElasticLaw::NeoHookeanFluid,
            _ => ElasticLaw::StvkHencky,
        }
    }

    pub fn return_mapping(self) -> ReturnMapping {
        match self {
            MaterialClass::Elastic | MaterialClass::NewtonianFluid => ReturnMapping::Identity,
            MaterialClass::Plasticine => ReturnMapping::VonMisesDamage,
            MaterialClass::Metal => ReturnMapping::VonMises,
            MaterialClass::Foam => ReturnMapping::Viscoplastic,
            MaterialClass::Sand => ReturnMapping::DruckerPrager,
            MaterialClass::NonNewtonianFluid => ReturnMapping::HerschelBulkley,
        }
    }

    /// Class-specific coefficients in declaration order (density excluded).
    pub fn coefficients(self) -> &'static [Param] {
        use Param::*;
        match self {
            MaterialClass::Elastic => &[YoungsModulus, PoissonRatio],
            MaterialClass::Plasticine | MaterialClass::Metal => {
                &[YoungsModulus, PoissonRatio, YieldStress]
            }
            MaterialClass::Foam => &[YoungsModulus, PoissonRatio, YieldStress, PlasticViscosity],
            MaterialClass::Sand => &[FrictionAngle],
            MaterialClass::NewtonianFluid => &[FluidViscosity, BulkModulus],
            MaterialClass::NonNewtonianFluid => {
                &[FluidViscosity, BulkModulus, YieldStress, PlasticViscosity]
            }
        }
    }
}

impl fmt::Display for MaterialClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

/// A named material parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Param {
    Density,
    YoungsModulus,
    PoissonRatio,
    YieldStress,
    PlasticViscosity,
    FluidViscosity,
    BulkModulus,
    FrictionAngle,
}

impl Param {
    /// Key used in the flat JSON representation.
    pub fn key(self) -> &'static str {
        match self {
            Param::Density => "density",
            Param::YoungsModulus => "E",
            Param::PoissonRatio => "nu",
            Param::YieldStress => "tau_Y",
            Param::PlasticViscosity => "eta",
            Param::FluidViscosity => "mu",
            Param::BulkModulus => "kappa",
            Param::FrictionAngle => "theta_fric",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Some(match key {
            "density" => Param::Density,
            "E" => Param::YoungsModulus,
            "nu" => Param::PoissonRatio,
            "tau_Y" => Param::YieldStress,
            "eta" => Param::PlasticViscosity,
            "mu" => Param::FluidViscosity,
            "kappa" => Param::BulkModulus,
            "theta_fric" => Param::FrictionAngle,
            _ => return None,
        })
    }

    pub fn unit(self) -> &'static str {
        match self {
            Param::Density => "kg/m³",
            Param::YoungsModulus | Param::YieldStress | Param::BulkModulus => "Pa",
            Param::PoissonRatio | Param::PlasticViscosity => "unitless",
            Param::FluidViscosity => "Pa·s",
            Param::FrictionAngle => "°",
        }
    }

    /// Whether the optimiser works on `ln(value)` rather than a linear map
    /// of the range onto `[0, 1]`.
    pub fn is_log_scaled(self) -> bool {
        matches!(
            self,
            Param::Density
                | Param::YoungsModulus
                | Param::YieldStress
                | Param::FluidViscosity
                | Param::BulkModulus
        )
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Closed admissible interval for one parameter of one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamRange {
    pub param: Param,
    pub lower: f64,
    pub upper: f64,
    pub unit: &'static str,
}

impl ParamRange {
    const fn new(param: Param, lower: f64, upper: f64, unit: &'static str) -> Self {
        ParamRange {
            param,
            lower,
            upper,
            unit,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.lower && value <= self.upper
    }

    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.lower, self.upper)
    }
}

pub const DENSITY_RANGE: ParamRange = ParamRange::new(Param::Density, 10.0, 2.3e4, "kg/m³");

const ELASTIC: [ParamRange; 2] = [
    ParamRange::new(Param::YoungsModulus, 1e7, 4e11, "Pa"),
    ParamRange::new(Param::PoissonRatio, 0.1, 0.5, "unitless"),
];
const PLASTICINE: [ParamRange; 3] = [
    ParamRange::new(Param::YoungsModulus, 1e6, 5e6, "Pa"),
    ParamRange::new(Param::PoissonRatio, 0.3, 0.4, "unitless"),
    ParamRange::new(Param::YieldStress, 5e3, 2e4, "Pa"),
];
const METAL: [ParamRange; 3] = [
    ParamRange::new(Param::YoungsModulus, 4.5e10, 4.0e11, "Pa"),
    ParamRange::new(Param::PoissonRatio, 0.25, 0.35, "unitless"),
    ParamRange::new(Param::YieldStress, 1e7, 2e9, "Pa"),
];
const FOAM: [ParamRange; 4] = [
    ParamRange::new(Param::YoungsModulus, 1e3, 1e7, "Pa"),
    ParamRange::new(Param::PoissonRatio, 0.0, 0.3, "unitless"),
    ParamRange::new(Param::YieldStress, 1e4, 1e6, "Pa"),
    ParamRange::new(Param::PlasticViscosity, 0.1, 1.0, "unitless"),
];
const SAND: [ParamRange; 1] = [ParamRange::new(Param::FrictionAngle, 27.0, 45.0, "°")];
const NEWTONIAN: [ParamRange; 2] = [
    ParamRange::new(Param::FluidViscosity, 1e-3, 10.0, "Pa·s"),
    ParamRange::new(Param::BulkModulus, 1e9, 5e9, "Pa"),
];
const NON_NEWTONIAN: [ParamRange; 4] = [
    ParamRange::new(Param::FluidViscosity, 1e-3, 1e3, "Pa·s"),
    ParamRange::new(Param::BulkModulus, 1e9, 5e9, "Pa"),
    ParamRange::new(Param::YieldStress, 1.0, 2e3, "Pa"),
    ParamRange::new(Param::PlasticViscosity, 0.1, 1.0, "unitless"),
];

/// Admissible ranges of the class coefficients, in declaration order,
/// followed by the common density range.
pub fn range_catalog(class: MaterialClass) -> Vec<ParamRange> {
    let specific: &[ParamRange] = match class {
        MaterialClass::Elastic => &ELASTIC,
        MaterialClass::Plasticine => &PLASTICINE,
        MaterialClass::Metal => &METAL,
        MaterialClass::Foam => &FOAM,
        MaterialClass::Sand => &SAND,
        MaterialClass::NewtonianFluid => &NEWTONIAN,
        MaterialClass::NonNewtonianFluid => &NON_NEWTONIAN,
    };
    let mut out = specific.to_vec();
    out.push(DENSITY_RANGE);
    out
}

/// Range of a single parameter for a class, if the class uses it.
pub fn range_of(class: MaterialClass, param: Param) -> Option<ParamRange> {
    range_catalog(class).into_iter().find(|r| r.param == param)
}

/// Density, class and class-specific coefficients shared by a particle group.
///
/// Serialises to a flat JSON object (`material_type`, `density`, `E`, `nu`,
/// `tau_Y`, `mu`, `kappa`, `eta`, `theta_fric`) in SI units; absent fields are
/// omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    #[serde(rename = "material_type", with = "class_name")]
    pub class: MaterialClass,
    pub density: f64,
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    pub youngs_modulus: Option<f64>,
    #[serde(rename = "nu", default, skip_serializing_if = "Option::is_none")]
    pub poisson_ratio: Option<f64>,
    #[serde(rename = "tau_Y", default, skip_serializing_if = "Option::is_none")]
    pub yield_stress: Option<f64>,
    #[serde(rename = "mu", default, skip_serializing_if = "Option::is_none")]
    pub fluid_viscosity: Option<f64>,
    #[serde(rename = "kappa", default, skip_serializing_if = "Option::is_none")]
    pub bulk_modulus: Option<f64>,
    #[serde(rename = "eta", default, skip_serializing_if = "Option::is_none")]
    pub plastic_viscosity: Option<f64>,
    #[serde(rename = "theta_fric", default, skip_serializing_if = "Option::is_none")]
    pub friction_angle: Option<f64>,
}

mod class_name {
    use super::MaterialClass;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(class: &MaterialClass, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(class.display_name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<MaterialClass, D::Error> {
        let name = String::deserialize(d)?;
        MaterialClass::from_name(&name)
            .ok_or_else(|| D::Error::custom(format!("unknown material type `{name}`")))
    }
}

impl MaterialParams {
    /// Empty parameter set for a class; only density is filled in.
    pub fn new(class: MaterialClass, density: f64) -> Self {
        MaterialParams {
            class,
            density,
            youngs_modulus: None,
            poisson_ratio: None,
            yield_stress: None,
            fluid_viscosity: None,
            bulk_modulus: None,
            plastic_viscosity: None,
            friction_angle: None,
        }
    }

    /// Builder-style setter.
    pub fn with(mut self, param: Param, value: f64) -> Self {
        self.set(param, Some(value));
        self
    }

    pub fn get(&self, param: Param) -> Option<f64> {
        match param {
            Param::Density => Some(self.density),
            Param::YoungsModulus => self.youngs_modulus,
            Param::PoissonRatio => self.poisson_ratio,
            Param::YieldStress => self.yield_stress,
            Param::PlasticViscosity => self.plastic_viscosity,
            Param::FluidViscosity => self.fluid_viscosity,
            Param::BulkModulus => self.bulk_modulus,
            Param::FrictionAngle => self.friction_angle,
        }
    }

    pub fn set(&mut self, param: Param, value: Option<f64>) {
        match param {
            Param::Density => self.density = value.unwrap_or(f64::NAN),
            Param::YoungsModulus => self.youngs_modulus = value,
            Param::PoissonRatio => self.poisson_ratio = value,
            Param::YieldStress => self.yield_stress = value,
            Param::PlasticViscosity => self.plastic_viscosity = value,
            Param::FluidViscosity => self.fluid_viscosity = value,
            Param::BulkModulus => self.bulk_modulus = value,
            Param::FrictionAngle => self.friction_angle = value,
        }
    }

    /// Coefficient value that [`validate_fields`](Self::validate_fields) has
    /// guaranteed to be present.
    pub fn require(&self, param: Param) -> Result<f64, MaterialError> {
        self.get(param).ok_or(MaterialError::MissingField {
            class: self.class,
            field: param,
        })
    }

    /// Checks that the present fields are exactly the class's field set and
    /// that every value is finite. Ranges are not checked.
    pub fn validate_fields(&self) -> Result<(), MaterialError> {
        const OPTIONAL: [Param; 7] = [
            Param::YoungsModulus,
            Param::PoissonRatio,
            Param::YieldStress,
            Param::FluidViscosity,
            Param::BulkModulus,
            Param::PlasticViscosity,
            Param::FrictionAngle,
        ];
        let wanted = self.class.coefficients();
        for param in OPTIONAL {
            match (self.get(param), wanted.contains(&param)) {
                (None, true) => {
                    return Err(MaterialError::MissingField {
                        class: self.class,
                        field: param,
                    })
                }
                (Some(_), false) => {
                    return Err(MaterialError::ExtraField {
                        class: self.class,
                        field: param,
                    })
                }
                _ => {}
            }
        }
        for r in range_catalog(self.class) {
            let v = self.get(r.param).unwrap_or(f64::NAN);
            if !v.is_finite() {
                return Err(MaterialError::NonFinite {
                    field: r.param,
                    value: v,
                });
            }
        }
        Ok(())
    }

    /// Values of the listed ranges' parameters, in order.
    pub fn values(&self, ranges: &[ParamRange]) -> Vec<f64> {
        ranges
            .iter()
            .map(|r| self.get(r.param).unwrap_or(f64::NAN))
            .collect()
    }

    /// True when fields are valid and every value lies inside its range.
    pub fn is_in_range(&self) -> bool {
        self.validate_fields().is_ok()
            && range_catalog(self.class)
                .iter()
                .all(|r| r.contains(self.get(r.param).unwrap_or(f64::NAN)))
    }
}

/// One modification made by [`clamp_to_range`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampEvent {
    pub field: Param,
    pub original: f64,
    pub clamped: f64,
}

/// Clamps every present field into its admissible range.
///
/// Values already inside their range pass through untouched; each changed
/// value produces one [`ClampEvent`].
pub fn clamp_to_range(
    params: &MaterialParams,
) -> Result<(MaterialParams, Vec<ClampEvent>), MaterialError> {
    params.validate_fields()?;
    let mut out = params.clone();
    let mut events = Vec::new();
    for r in range_catalog(params.class) {
        let original = params.get(r.param).expect("validated");
        if !r.contains(original) {
            let clamped = r.clamp(original);
            out.set(r.param, Some(clamped));
            events.push(ClampEvent {
                field: r.param,
                original,
                clamped,
            });
        }
    }
    Ok((out, events))
}

/// Shear modulus and first Lamé parameter, in Pa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LameCoefficients {
    pub mu: f64,
    pub lambda: f64,
}

impl LameCoefficients {
    pub fn scaled(self, factor: f64) -> Self {
        LameCoefficients {
            mu: self.mu * factor,
            lambda: self.lambda * factor,
        }
    }

    /// Bulk modulus `λ + 2μ/3`.
    pub fn bulk(self) -> f64 {
        self.lambda + 2.0 * self.mu / 3.0
    }
}

/// Standard isotropic conversion from Young's modulus and Poisson ratio.
pub fn lame_from_young_poisson(e: f64, nu: f64) -> Result<LameCoefficients, MaterialError> {
    if !(e > 0.0) {
        return Err(MaterialError::NonPositiveModulus(e));
    }
    if !(0.0..0.5).contains(&nu) {
        return Err(MaterialError::DegenerateMaterial { nu });
    }
    Ok(LameCoefficients {
        mu: e / (2.0 * (1.0 + nu)),
        lambda: e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
    })
}

/// Coordinate of a single value in the optimiser's scaled space.
pub fn scale_value(range: &ParamRange, value: f64) -> f64 {
    if range.param.is_log_scaled() {
        value.ln()
    } else {
        (value - range.lower) / (range.upper - range.lower)
    }
}

/// Inverse of [`scale_value`].
pub fn unscale_value(range: &ParamRange, coord: f64) -> f64 {
    if range.param.is_log_scaled() {
        coord.exp()
    } else {
        range.lower + coord * (range.upper - range.lower)
    }
}

/// Scaled-space box for a parameter: `[ln lo, ln hi]` or `[0, 1]`.
pub fn scaled_bounds(range: &ParamRange) -> (f64, f64) {
    if range.param.is_log_scaled() {
        (range.lower.ln(), range.upper.ln())
    } else {
        (0.0, 1.0)
    }
}

/// Maps params to the scaled vector, ordered as [`range_catalog`]: class
/// coefficients first, density last.
pub fn log_scale(params: &MaterialParams) -> Result<Vec<f64>, MaterialError> {
    params.validate_fields()?;
    Ok(range_catalog(params.class)
        .iter()
        .map(|r| scale_value(r, params.get(r.param).expect("validated")))
        .collect())
}

/// Inverse of [`log_scale`].
pub fn unscale(class: MaterialClass, coords: &[f64]) -> Result<MaterialParams, MaterialError> {
    let catalog = range_catalog(class);
    if coords.len() != catalog.len() {
        return Err(MaterialError::ScaledLength {
            class,
            expected: catalog.len(),
            got: coords.len(),
        });
    }
    let mut params = MaterialParams::new(class, f64::NAN);
    for (r, &c) in catalog.iter().zip(coords) {
        params.set(r.param, Some(unscale_value(r, c)));
    }
    Ok(params)
}
