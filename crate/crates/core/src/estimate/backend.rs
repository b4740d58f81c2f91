//! Language-model backends: an HTTP client, a canned mock and a transcript
//! replayer.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::prompt::{build_prompt, InitRequest};
use super::InitError;

/// Environment variable holding the HTTP endpoint URL.
pub const ENDPOINT_ENV: &str = "MPHYS_LLM_ENDPOINT";
/// Environment variable holding the bearer token.
pub const TOKEN_ENV: &str = "MPHYS_LLM_TOKEN";

/// Hex SHA-256 of a prompt; the key of canned and recorded answers.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

pub trait LlmBackend {
    fn name(&self) -> &'static str;
    fn send(&mut self, prompt: &str, image: Option<&Path>) -> Result<String, InitError>;
}

/// One prompt/answer exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub backend: String,
    pub prompt_sha256: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    pub response: String,
}

/// Answers keyed by prompt hash.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockBackend {
    pub answers: BTreeMap<String, String>,
}

/// Prompts answered by [`MockBackend::builtin`].
pub const ELASTIC_BLOCK_PROMPT: &str = "A rubber block drops onto the floor and bounces.";
pub const AXE_PROMPT: &str = "An axe is hitting the ground.";
pub const HONEY_PROMPT: &str = "Thin syrup pours out and spreads over the floor.";

const CANNED: [(&str, &str); 3] = [
    (
        AXE_PROMPT,
        r#"{
  "material_type": "Metal",
  "density": 7850,
  "E": 2.1e11,
  "nu": 0.30,
  "tau_Y": 2.5e8
}"#,
    ),
    (
        ELASTIC_BLOCK_PROMPT,
        r#"{
  "material_type": "Elastic",
  "density": 1000,
  "E": 2e7,
  "nu": 0.4
}"#,
    ),
    (
        HONEY_PROMPT,
        r#"{
  "material_type": "Newtonian fluid",
  "density": 1000,
  "mu": 0.5,
  "kappa": 2e9
}"#,
    ),
];

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Answers for the text-only prompts of the bundled scenarios.
    pub fn builtin() -> Self {
        let mut m = MockBackend::new();
        for (prompt, answer) in CANNED {
            m.insert_for_request(&InitRequest::new(prompt), answer);
        }
        m
    }

    pub fn insert(&mut self, prompt: &str, answer: impl Into<String>) {
        self.answers.insert(prompt_hash(prompt), answer.into());
    }

    /// Registers the answer to the rendered prompt of `req`.
    pub fn insert_for_request(&mut self, req: &InitRequest, answer: impl Into<String>) {
        self.insert(&build_prompt(req), answer);
    }
}

impl LlmBackend for MockBackend {
    fn name(&self) -> &'static str {
        "mock"
    }

    fn send(&mut self, prompt: &str, _image: Option<&Path>) -> Result<String, InitError> {
        let key = prompt_hash(prompt);
        self.answers
            .get(&key)
            .cloned()
            .ok_or_else(|| InitError::BackendUnavailable(format!("mock has no answer for prompt {key}")))
    }
}

/// Replays a recorded transcript by prompt hash, in recorded order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayBackend {
    entries: Vec<TranscriptEntry>,
    used: Vec<bool>,
}

impl ReplayBackend {
    pub fn new(entries: Vec<TranscriptEntry>) -> Self {
        let used = vec![false; entries.len()];
        ReplayBackend { entries, used }
    }

    pub fn from_json(text: &str) -> Result<Self, InitError> {
        serde_json::from_str(text)
            .map(Self::new)
            .map_err(|e| InitError::BackendUnavailable(format!("unreadable transcript: {e}")))
    }
}

impl LlmBackend for ReplayBackend {
    fn name(&self) -> &'static str {
        "replay"
    }

    fn send(&mut self, prompt: &str, _image: Option<&Path>) -> Result<String, InitError> {
        let key = prompt_hash(prompt);
        let slot = self
            .entries
            .iter()
            .zip(&self.used)
            .position(|(e, used)| !used && e.prompt_sha256 == key)
            .ok_or_else(|| {
                InitError::BackendUnavailable(format!("transcript has no unused entry for prompt {key}"))
            })?;
        self.used[slot] = true;
        Ok(self.entries[slot].response.clone())
    }
}

/// Posts `{"prompt": …, "image": base64?}` and returns the body verbatim.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    pub endpoint: String,
    token: String,
    pub timeout: Duration,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, token: impl Into<String>) -> Self {
        HttpBackend {
            endpoint: endpoint.into(),
            token: token.into(),
            timeout: Duration::from_secs(60),
        }
    }

    /// Reads the endpoint and token from [`ENDPOINT_ENV`] and [`TOKEN_ENV`].
    pub fn from_env() -> Result<Self, InitError> {
        let get = |var: &str| {
            std::env::var(var).ok().filter(|v| !v.is_empty()).ok_or_else(|| {
                InitError::BackendUnavailable(format!(
                    "{var} is not set; export {ENDPOINT_ENV} and {TOKEN_ENV} or use --backend mock"
                ))
            })
        };
        Ok(HttpBackend::new(get(ENDPOINT_ENV)?, get(TOKEN_ENV)?))
    }
}

impl LlmBackend for HttpBackend {
    fn name(&self) -> &'static str {
        "http"
    }

    fn send(&mut self, prompt: &str, image: Option<&Path>) -> Result<String, InitError> {
        let unavailable = |e: &dyn std::fmt::Display| InitError::BackendUnavailable(e.to_string());
        let mut body = serde_json::json!({ "prompt": prompt });
        if let Some(path) = image {
            let bytes = std::fs::read(path)
                .map_err(|e| unavailable(&format!("cannot read image {}: {e}", path.display())))?;
            body["image"] = base64::engine::general_purpose::STANDARD.encode(bytes).into();
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.token))
            .send_json(&body)
            .map_err(|e| unavailable(&e))?
            .body_mut()
            .read_to_string()
            .map_err(|e| unavailable(&e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_mock_answers_axe() {
        let mut m = MockBackend::builtin();
        let answer = m.send(&build_prompt(&InitRequest::new(AXE_PROMPT)), None).unwrap();
        assert!(answer.contains("Metal"));
        assert!(m.send("something else", None).is_err());
    }

    #[test]
    fn replay_serves_entries_in_order() {
        let entry = |r: &str| TranscriptEntry {
            backend: "mock".into(),
            prompt_sha256: prompt_hash("p"),
            prompt: "p".into(),
            image: None,
            response: r.into(),
        };
        let mut r = ReplayBackend::new(vec![entry("first"), entry("second")]);
        assert_eq!(r.send("p", None).unwrap(), "first");
        assert_eq!(r.send("p", None).unwrap(), "second");
        assert!(r.send("p", None).is_err());
    }
}
