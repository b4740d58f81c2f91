//! Scenes shipped with the crate.
//!
//! `elastic_drop`, `newtonian_pour` and `toothpaste` are small demonstration
//! scenes, `sand_column` and `elastic_recovery` back the acceptance checks,
//! and the remaining nine reproduce the force schedules of the real-world
//! captures (directions and durations) on placeholder geometry.

use super::{parse_scene, SceneConfig, SceneError};

macro_rules! scenes {
    ($($name:literal),* $(,)?) => {
        const SCENES: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../../scenes/", $name, ".json")))),*
        ];
    };
}

scenes!(
    "elastic_drop",
    "newtonian_pour",
    "toothpaste",
    "sand_column",
    "elastic_recovery",
    "alocasia",
    "carnation",
    "hat",
    "telephone",
    "fox",
    "plane",
    "kitchen",
    "jam",
    "sandcastle",
);

/// Scenes with scripted forces, one per captured real-world sequence.
pub const FORCE_SCENES: [&str; 9] = [
    "alocasia",
    "carnation",
    "hat",
    "telephone",
    "fox",
    "plane",
    "kitchen",
    "jam",
    "sandcastle",
];

/// Names of every bundled scene.
pub fn names() -> impl Iterator<Item = &'static str> {
    SCENES.iter().map(|(n, _)| *n)
}

/// The JSON source of a bundled scene.
pub fn source(name: &str) -> Option<&'static str> {
    SCENES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Parses a bundled scene by name.
pub fn bundled(name: &str) -> Result<SceneConfig, SceneError> {
    let text = source(name).ok_or_else(|| {
        SceneError::Validation(format!(
            "no bundled scene named {name}; available: {}",
            names().collect::<Vec<_>>().join(", ")
        ))
    })?;
    parse_scene(text)
}
