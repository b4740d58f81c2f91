//! The range-constrained initialization prompt.

use std::fmt::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::material::{range_catalog, MaterialClass, ParamRange, DENSITY_RANGE};

/// What the language model is asked about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitRequest {
    /// Textual description of the simulated scene.
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_hint: Option<MaterialClass>,
}

impl InitRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        InitRequest {
            prompt: prompt.into(),
            image: None,
            class_hint: None,
        }
    }
}

/// JSON keys of the response, in skeleton order.
pub const RESPONSE_KEYS: [&str; 9] = [
    "material_type",
    "density",
    "E",
    "nu",
    "tau_Y",
    "mu",
    "kappa",
    "eta",
    "theta_fric",
];

/// Formats a range bound the way handbooks print it: plain for moderate
/// magnitudes, `m × 10^e` otherwise.
pub fn format_bound(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let e = x.abs().log10().floor() as i32;
    if (-2..=3).contains(&e) {
        return format!("{}", (x * 1e6).round() / 1e6);
    }
    let m = (x / 10f64.powi(e) * 1e3).round() / 1e3;
    format!("{m} × 10^{e}")
}

fn format_range(r: &ParamRange) -> String {
    let (lo, hi) = (format_bound(r.lower), format_bound(r.upper));
    match r.unit {
        "°" => format!("{lo} – {hi}°"),
        "unitless" => format!("{lo} – {hi}"),
        unit => format!("{lo} – {hi} {unit}"),
    }
}

/// Renders the initialization prompt: the inputs, the question, the
/// per-class required parameters, every admissible range and the JSON
/// response skeleton. Deterministic in the request.
pub fn build_prompt(req: &InitRequest) -> String {
    let mut s = String::new();
    s.push_str("Inputs:\n");
    let _ = writeln!(s, "- Textual simulation prompt: \"{}\"", req.prompt.trim());
    match &req.image {
        Some(path) => {
            let _ = writeln!(s, "- Reference image: {}", path.display());
        }
        None => s.push_str("- Reference image: none\n"),
    }
    s.push('\n');
    s.push_str(
        "Q: What is this object? Decide its material type mainly from the textual \
         simulation prompt, then estimate its density (kg/m³) and the physical \
         parameters that material type requires.",
    );
    if req.image.is_some() {
        s.push_str(" Use the image as secondary visual reference only.");
    }
    s.push('\n');
    if let Some(class) = req.class_hint {
        let _ = writeln!(s, "The object is expected to be {}.", class.display_name());
    }

    s.push_str("\nMaterial types and their required parameters (SI units):\n");
    for class in MaterialClass::ALL {
        let fields: Vec<String> = class
            .coefficients()
            .iter()
            .map(|p| format!("{} ({})", p.key(), p.unit()))
            .collect();
        let _ = writeln!(s, "- {}: {}", class.display_name(), fields.join(", "));
    }

    s.push_str("\nEvery inferred parameter must lie within these ranges:\n");
    for class in MaterialClass::ALL {
        let _ = writeln!(s, "- {}:", class.display_name());
        for r in range_catalog(class).iter().filter(|r| r.param != DENSITY_RANGE.param) {
            let _ = writeln!(s, "  - {}: {}", r.param.key(), format_range(r));
        }
    }
    let _ = writeln!(s, "- Density: {}", format_range(&DENSITY_RANGE));

    s.push_str("\nAnswer with one JSON object in exactly this format:\n{\n");
    for (i, key) in RESPONSE_KEYS.iter().enumerate() {
        let value = if i == 0 { "\"...\"" } else { "..." };
        let comma = if i + 1 < RESPONSE_KEYS.len() { "," } else { "" };
        let _ = writeln!(s, "  \"{key}\": {value}{comma}");
    }
    s.push_str("}\nInclude only the fields relevant to the inferred material type.\n");
    s
}
