//! Validation of language-model answers.

use serde_json::{Map, Value};

use super::InitError;
use crate::material::{clamp_to_range, ClampEvent, MaterialClass, MaterialParams, Param};

/// Longest snippet of offending text carried by an error.
const SNIPPET_LEN: usize = 120;

pub(crate) fn snippet(text: &str) -> String {
    let t = text.trim();
    match t.char_indices().nth(SNIPPET_LEN) {
        Some((cut, _)) => format!("{}…", &t[..cut]),
        None => t.to_string(),
    }
}

/// Byte range of the balanced `{…}` starting at `start`, skipping braces
/// inside string literals.
fn balanced_object(text: &str, start: usize) -> Option<&str> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, ch) in text[start..].char_indices() {
        if in_string {
            match ch {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match ch {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + i + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

/// The first balanced brace span that parses as a JSON object.
pub fn extract_json_object(text: &str) -> Result<Map<String, Value>, InitError> {
    let mut first_error = None;
    for (start, _) in text.match_indices('{') {
        let Some(candidate) = balanced_object(text, start) else {
            continue;
        };
        match serde_json::from_str::<Value>(candidate) {
            Ok(Value::Object(map)) => return Ok(map),
            Ok(_) => {}
            Err(e) => {
                first_error.get_or_insert(InitError::InvalidJson {
                    message: e.to_string(),
                    snippet: snippet(candidate),
                });
            }
        }
    }
    Err(first_error.unwrap_or_else(|| InitError::NoJsonFound {
        snippet: snippet(text),
    }))
}

/// Parameters accepted from an answer plus the clamps applied to them.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedInit {
    pub params: MaterialParams,
    pub clamps: Vec<ClampEvent>,
}

/// Extracts the first JSON object, resolves the material type, checks the
/// field set against the class and clamps every value into its range.
/// Values are taken to be in SI units.
pub fn parse_init_response(text: &str) -> Result<ParsedInit, InitError> {
    let map = extract_json_object(text)?;
    let snip = || snippet(&Value::Object(map.clone()).to_string());
    let class = match map.get("material_type") {
        Some(Value::String(name)) => {
            MaterialClass::from_name(name).ok_or_else(|| InitError::UnknownMaterialType {
                name: name.clone(),
                snippet: snip(),
            })?
        }
        Some(other) => {
            return Err(InitError::UnknownMaterialType {
                name: other.to_string(),
                snippet: snip(),
            })
        }
        None => return Err(InitError::MissingMaterialType { snippet: snip() }),
    };
    let mut params = MaterialParams::new(class, f64::NAN);
    let mut saw_density = false;
    for (key, value) in &map {
        if key == "material_type" {
            continue;
        }
        let param = Param::from_key(key).ok_or_else(|| InitError::UnknownField {
            field: key.clone(),
            snippet: snip(),
        })?;
        let number = value.as_f64().ok_or_else(|| InitError::NonNumeric {
            field: key.clone(),
            snippet: snip(),
        })?;
        saw_density |= param == Param::Density;
        params.set(param, Some(number));
    }
    if !saw_density {
        return Err(InitError::Material {
            source: crate::material::MaterialError::MissingField {
                class,
                field: Param::Density,
            },
            snippet: snip(),
        });
    }
    let (params, clamps) = clamp_to_range(&params).map_err(|source| InitError::Material {
        source,
        snippet: snip(),
    })?;
    Ok(ParsedInit { params, clamps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::MaterialError;

    const METAL: &str = r#"{
      "material_type": "Metal",
      "density": 7850,
      "E": 2.1e11,
      "nu": 0.30,
      "tau_Y": 2.5e8
    }"#;

    #[test]
    fn metal_answer_parses_without_clamps() {
        let p = parse_init_response(METAL).unwrap();
        assert_eq!(p.params.class, MaterialClass::Metal);
        assert_eq!(p.params.density, 7850.0);
        assert_eq!(p.params.youngs_modulus, Some(2.1e11));
        assert!(p.clamps.is_empty());
    }

    #[test]
    fn stiff_metal_is_clamped_once() {
        let p = parse_init_response(&METAL.replace("2.1e11", "5e11")).unwrap();
        assert_eq!(p.params.youngs_modulus, Some(4.0e11));
        assert_eq!(p.clamps.len(), 1);
        assert_eq!(p.clamps[0].field, Param::YoungsModulus);
        assert_eq!(p.clamps[0].original, 5e11);
    }

    #[test]
    fn json_inside_prose() {
        let text = format!("Sure! Here is my estimate {{as asked}}:\n```json\n{METAL}\n```\nThanks.");
        assert_eq!(
            parse_init_response(&text).unwrap().params.class,
            MaterialClass::Metal
        );
    }

    #[test]
    fn typed_errors() {
        assert!(matches!(
            parse_init_response("no json here"),
            Err(InitError::NoJsonFound { .. })
        ));
        assert!(matches!(
            parse_init_response(r#"{"material_type": "jelly", "density": 1000}"#),
            Err(InitError::UnknownMaterialType { .. })
        ));
        assert!(matches!(
            parse_init_response(r#"{"material_type": "Sand", "density": 1600, "theta_fric": "steep"}"#),
            Err(InitError::NonNumeric { .. })
        ));
        assert!(matches!(
            parse_init_response(r#"{"material_type": "Sand", "density": 1600}"#),
            Err(InitError::Material {
                source: MaterialError::MissingField { field: Param::FrictionAngle, .. },
                ..
            })
        ));
        assert!(matches!(
            parse_init_response(r#"{"material_type": "Sand", "density": 1600, "theta_fric": 30, "E": 1e6}"#),
            Err(InitError::Material {
                source: MaterialError::ExtraField { .. },
                ..
            })
        ));
        assert!(matches!(
            parse_init_response(r#"{"material_type": "Sand", "theta_fric": 30}"#),
            Err(InitError::Material { .. })
        ));
        assert!(matches!(
            parse_init_response(r#"{"material_type": "Sand", "density": 1600, "friction": 30}"#),
            Err(InitError::UnknownField { .. })
        ));
    }
}
