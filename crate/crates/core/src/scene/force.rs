//! Particle force modules.

use serde::{Deserialize, Serialize};

use super::boundary::{validate_window, window_steps};
use super::Aabb;
use crate::constitutive::Vec3;

fn all_axes() -> [bool; 3] {
    [true; 3]
}

/// Picks particles by initial-region box and/or group id. An empty selector
/// matches everything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Selector {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Aabb>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<u32>>,
}

impl Selector {
    pub fn matches(&self, position: &Vec3, group: u32) -> bool {
        self.region.map_or(true, |r| r.contains(position))
            && self.groups.as_ref().map_or(true, |g| g.contains(&group))
    }
}

/// How long an impulse lasts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Duration {
    Substeps(u64),
    Seconds(f64),
}

impl Duration {
    pub fn substeps(self, dt: f64) -> u64 {
        match self {
            Duration::Substeps(n) => n,
            Duration::Seconds(s) => (s / dt).round() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForceModule {
    /// Adds `dt · force` to the velocity of selected particles every substep
    /// of the window; `force` is per unit mass (m/s²).
    AddConstantForce {
        #[serde(default)]
        select: Selector,
        force: [f64; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<[f64; 2]>,
    },
    /// Adds `impulse` (m/s) to the velocity of selected particles once per
    /// substep, for `duration` substeps starting at `start` seconds.
    AddImpulse {
        #[serde(default)]
        select: Selector,
        impulse: [f64; 3],
        #[serde(default)]
        start: f64,
        duration: Duration,
    },
    /// Overrides the velocity of selected particles on the chosen axes.
    ForceParticlesTranslation {
        #[serde(default)]
        select: Selector,
        velocity: [f64; 3],
        #[serde(default = "all_axes")]
        axes: [bool; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<[f64; 2]>,
    },
    /// Overrides the velocity of selected particles with a rigid rotation
    /// `ω × (x − p)` about the axis through `axis_point`.
    ForceParticlesRotation {
        #[serde(default)]
        select: Selector,
        axis_point: [f64; 3],
        axis: [f64; 3],
        /// Signed angular speed in rad/s.
        angular_speed: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<[f64; 2]>,
    },
    /// Unfreezes selected frozen particles `layer_size` at a time, lowest
    /// index first, at evenly spaced ticks across the window.
    ReleaseParticles {
        #[serde(default)]
        select: Selector,
        layer_size: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<[f64; 2]>,
    },
}

impl ForceModule {
    pub fn name(&self) -> &'static str {
        match self {
            ForceModule::AddConstantForce { .. } => "add_constant_force",
            ForceModule::AddImpulse { .. } => "add_impulse",
            ForceModule::ForceParticlesTranslation { .. } => "force_particles_translation",
            ForceModule::ForceParticlesRotation { .. } => "force_particles_rotation",
            ForceModule::ReleaseParticles { .. } => "release_particles",
        }
    }

    pub fn selector(&self) -> &Selector {
        match self {
            ForceModule::AddConstantForce { select, .. }
            | ForceModule::AddImpulse { select, .. }
            | ForceModule::ForceParticlesTranslation { select, .. }
            | ForceModule::ForceParticlesRotation { select, .. }
            | ForceModule::ReleaseParticles { select, .. } => select,
        }
    }

    /// Substep index range `[start, end)` during which the module acts;
    /// `total_steps` bounds open windows.
    pub fn step_range(&self, dt: f64, total_steps: u64) -> (u64, u64) {
        let (a, b) = match self {
            ForceModule::AddImpulse {
                start, duration, ..
            } => {
                let a = (start / dt).round() as u64;
                (a, a + duration.substeps(dt))
            }
            ForceModule::AddConstantForce { window, .. }
            | ForceModule::ForceParticlesTranslation { window, .. }
            | ForceModule::ForceParticlesRotation { window, .. }
            | ForceModule::ReleaseParticles { window, .. } => window_steps(*window, dt),
        };
        (a, b.min(total_steps))
    }

    pub(crate) fn validate(&self, duration: f64, dt: f64) -> Result<(), String> {
        match self {
            ForceModule::AddConstantForce { window, .. }
            | ForceModule::ForceParticlesTranslation { window, .. }
            | ForceModule::ReleaseParticles { window, .. } => validate_window(*window, duration)?,
            ForceModule::ForceParticlesRotation { window, axis, .. } => {
                validate_window(*window, duration)?;
                if Vec3::from(*axis).norm() == 0.0 {
                    return Err("rotation axis must be non-zero".into());
                }
            }
            ForceModule::AddImpulse {
                start,
                duration: d,
                ..
            } => {
                if let Duration::Seconds(s) = d {
                    let steps = s / dt;
                    if !(*s >= 0.0) || (steps - steps.round()).abs() > 1e-6 {
                        return Err(format!(
                            "impulse duration {s} s is not a whole number of substeps (dt = {dt})"
                        ));
                    }
                }
                let end = start + d.substeps(dt) as f64 * dt;
                validate_window(Some([*start, end]), duration)?;
            }
        }
        if let ForceModule::ReleaseParticles { layer_size: 0, .. } = self {
            return Err("release layer_size must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impulse_steps() {
        let f: ForceModule = serde_json::from_str(
            r#"{"kind": "add_impulse", "impulse": [0.44, 0, 0], "duration": {"substeps": 2}}"#,
        )
        .unwrap();
        assert_eq!(f.step_range(1e-3, 1000), (0, 2));
        assert!(f.validate(1.0, 1e-3).is_ok());
    }

    #[test]
    fn fractional_seconds_impulse_is_rejected() {
        let f = ForceModule::AddImpulse {
            select: Selector::default(),
            impulse: [1.0, 0.0, 0.0],
            start: 0.0,
            duration: Duration::Seconds(0.00015),
        };
        assert!(f.validate(1.0, 1e-4).is_err());
    }

    #[test]
    fn selector_filters() {
        let s = Selector {
            region: Some(Aabb {
                min: [0.0; 3],
                max: [0.5; 3],
            }),
            groups: Some(vec![1]),
        };
        assert!(s.matches(&Vec3::repeat(0.25), 1));
        assert!(!s.matches(&Vec3::repeat(0.25), 0));
        assert!(!s.matches(&Vec3::repeat(0.75), 1));
    }
}
