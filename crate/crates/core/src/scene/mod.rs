//! Declarative scenes: particle sources, grid and time stepping, boundary
//! conditions, force schedules, camera and perturbation settings.
//!
//! Scenes are JSON documents. [`parse_scene`] rejects unknown keys with the
//! JSON path of the offending value and then checks the cross-field rules
//! (at least one `bounding_box`, sticky colliders without friction, time
//! windows inside the simulated duration).

mod boundary;
pub mod bundled;
mod force;
mod perturb;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constitutive::Vec3;
use crate::material::{MaterialError, MaterialParams};
use crate::mpm::{GridSpec, StepConfig};

pub use boundary::{apply_boundary, BoundaryCondition, ColliderMode, Geometry};
pub use force::{ForceModule, Selector};
pub use perturb::{perturb_particles, PerturbConfig};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid scene: {0}")]
    Validation(String),
    #[error("invalid material in scene: {0}")]
    Material(#[from] MaterialError),
    #[error("cannot read particle file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Axis-aligned box in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|a| self.max[a] - self.min[a]).product()
    }

    fn validate(&self, what: &str) -> Result<(), SceneError> {
        if (0..3).any(|a| !(self.min[a] <= self.max[a])) {
            return Err(SceneError::Validation(format!(
                "{what}: box min {:?} exceeds max {:?}",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

/// Where an object's particles come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParticleSource {
    /// Regular lattice filling a box.
    Box { min: [f64; 3], max: [f64; 3] },
    /// Regular lattice clipped to a ball.
    Sphere { center: [f64; 3], radius: f64 },
    /// Whitespace separated `x y z [r g b]` lines; `#` starts a comment.
    File { path: PathBuf },
}

fn default_color() -> [f64; 3] {
    [0.8, 0.8, 0.8]
}

/// One particle group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub source: ParticleSource,
    /// Target particle count for lattice sources; ignored for files.
    #[serde(default)]
    pub count: usize,
    /// Material volume in m³ for file sources; defaults to the points'
    /// bounding-box volume.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<f64>,
    #[serde(default)]
    pub velocity: [f64; 3],
    #[serde(default = "default_color")]
    pub color: [f64; 3],
    /// Overrides the run's material for this group only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<MaterialParams>,
    /// Particles start frozen and wait for a `release_particles` module.
    #[serde(default)]
    pub frozen: bool,
}

/// Orthographic camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Camera {
    pub position: [f64; 3],
    pub look_at: [f64; 3],
    pub up: [f64; 3],
    /// Image size in pixels; both must be multiples of 8.
    pub width: usize,
    pub height: usize,
    /// World-space width covered by the image, in metres.
    pub view_width: f64,
}

impl Default for Camera {
    fn default() -> Self {
        Camera {
            position: [0.5, -2.0, 0.5],
            look_at: [0.5, 0.5, 0.5],
            up: [0.0, 0.0, 1.0],
            width: 64,
            height: 64,
            view_width: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderSettings {
    /// Disc radius in pixels.
    pub disc_radius: f64,
    pub alpha: f64,
    /// Velocity normalisation of the motion features, in m/s.
    pub velocity_scale: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            disc_radius: 1.5,
            alpha: 0.6,
            velocity_scale: 1.0,
        }
    }
}

fn default_modulus_scale() -> f64 {
    1.0
}

/// A complete scene description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub objects: Vec<ObjectSpec>,
    /// Default material for objects without their own; a command-line
    /// material takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<MaterialParams>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub step: StepConfig,
    /// Multiplies every stress-like material coefficient before simulation
    /// so that stiff real-world moduli fit the explicit time step.
    #[serde(default = "default_modulus_scale")]
    pub modulus_scale: f64,
    #[serde(default)]
    pub boundary_conditions: Vec<BoundaryCondition>,
    #[serde(default)]
    pub forces: Vec<ForceModule>,
    #[serde(default)]
    pub camera: Camera,
    #[serde(default)]
    pub render: RenderSettings,
    #[serde(default)]
    pub perturb: PerturbConfig,
    #[serde(default)]
    pub seed: u64,
    /// Directory that relative particle-file paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl SceneConfig {
    /// Total simulated time in seconds.
    pub fn duration(&self) -> f64 {
        self.step.frames as f64 * self.step.frame_duration
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let invalid = |m: String| Err(SceneError::Validation(m));
        if self.objects.is_empty() {
            return invalid("scene has no objects".into());
        }
        if let Some(m) = &self.material {
            m.validate_fields()?;
        }
        self.grid.validate().map_err(SceneError::Validation)?;
        self.step.validate().map_err(SceneError::Validation)?;
        if !(self.modulus_scale > 0.0 && self.modulus_scale.is_finite()) {
            return invalid(format!("modulus_scale {} must be positive", self.modulus_scale));
        }
        for (i, obj) in self.objects.iter().enumerate() {
            match &obj.source {
                ParticleSource::Box { min, max } => {
                    Aabb { min: *min, max: *max }.validate(&format!("objects[{i}]"))?;
                    if obj.count == 0 {
                        return invalid(format!("objects[{i}]: count must be positive"));
                    }
                }
                ParticleSource::Sphere { radius, .. } => {
                    if !(*radius > 0.0) || obj.count == 0 {
                        return invalid(format!(
                            "objects[{i}]: sphere needs a positive radius and count"
                        ));
                    }
                }
                ParticleSource::File { .. } => {}
            }
            if obj.color.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return invalid(format!("objects[{i}]: color components must lie in [0, 1]"));
            }
            if let Some(m) = &obj.material {
                m.validate_fields()?;
            }
        }
        if !self
            .boundary_conditions
            .iter()
            .any(|bc| matches!(bc, BoundaryCondition::BoundingBox { .. }))
        {
            return invalid("at least one bounding_box boundary condition is required".into());
        }
        let duration = self.duration();
        for (i, bc) in self.boundary_conditions.iter().enumerate() {
            bc.validate(duration)
                .map_err(|m| SceneError::Validation(format!("boundary_conditions[{i}]: {m}")))?;
        }
        for (i, f) in self.forces.iter().enumerate() {
            f.validate(duration, self.step.dt())
                .map_err(|m| SceneError::Validation(format!("forces[{i}]: {m}")))?;
        }
        let cam = &self.camera;
        if cam.width == 0 || cam.height == 0 || cam.width % 8 != 0 || cam.height % 8 != 0 {
            return invalid(format!(
                "camera image {}x{} must be a positive multiple of 8 on both axes",
                cam.width, cam.height
            ));
        }
        if !(cam.view_width > 0.0) {
            return invalid("camera view_width must be positive".into());
        }
        let forward = Vec3::from(cam.look_at) - Vec3::from(cam.position);
        if forward.norm() == 0.0 || forward.cross(&Vec3::from(cam.up)).norm() == 0.0 {
            return invalid("camera look direction must be non-zero and not parallel to up".into());
        }
        if !(self.render.disc_radius > 0.0) || !(0.0..=1.0).contains(&self.render.alpha) {
            return invalid("render disc_radius must be positive and alpha in [0, 1]".into());
        }
        if !(self.render.velocity_scale > 0.0) {
            return invalid("render velocity_scale must be positive".into());
        }
        if !(self.perturb.epsilon >= 0.0) {
            return invalid("perturb epsilon must be non-negative".into());
        }
        Ok(())
    }

    /// Resolves a particle-file path against the scene's directory.
    pub fn resolve_path(&self, path: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }
}

/// Parses and validates a scene document.
pub fn parse_scene(text: &str) -> Result<SceneConfig, SceneError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scene: SceneConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        SceneError::Parse {
            path,
            message: e.into_inner().to_string(),
        }
    })?;
    scene.validate()?;
    Ok(scene)
}

/// Reads a scene file; relative particle-file paths resolve against its
/// directory.
pub fn load_scene(path: &Path) -> Result<SceneConfig, SceneError> {
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut scene = parse_scene(&text)?;
    scene.base_dir = path.parent().map(Path::to_path_buf);
    Ok(scene)
}

/// Pretty JSON with every field written out.
pub fn serialize_scene(scene: &SceneConfig) -> String {
    serde_json::to_string_pretty(scene).expect("scene serialisation cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "objects": [{"source": {"shape": "box", "min": [0.4,0.4,0.4], "max": [0.6,0.6,0.6]}, "count": 64}],
        "boundary_conditions": [{"kind": "bounding_box"}]
    }"#;

    #[test]
    fn minimal_scene_parses() {
        let s = parse_scene(MINIMAL).unwrap();
        assert_eq!(s.step.substeps_per_frame, 256);
        assert_eq!(s.grid.resolution, [64; 3]);
    }

    #[test]
    fn unknown_key_reports_path() {
        let text = MINIMAL.replace("\"count\": 64", "\"count\": 64, \"colour\": [1,0,0]");
        match parse_scene(&text) {
            Err(SceneError::Parse { path, message }) => {
                assert_eq!(path, "objects[0].colour");
                assert!(message.contains("colour"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bounding_box_is_required() {
        let text = MINIMAL.replace(r#"{"kind": "bounding_box"}"#, "");
        assert!(matches!(parse_scene(&text), Err(SceneError::Validation(_))));
    }

    #[test]
    fn round_trip() {
        let s = parse_scene(MINIMAL).unwrap();
        let back = parse_scene(&serialize_scene(&s)).unwrap();
        assert_eq!(s, back);
    }
}
