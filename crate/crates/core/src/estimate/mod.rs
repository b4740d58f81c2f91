//! Material estimation: language-model initialization under range
//! constraints, then finite-difference optimisation of the class
//! coefficients against a reference trajectory.
//!
//! [`initialize`] renders the prompt, asks a [`LlmBackend`] and validates
//! the answer, retrying once with a clarification. [`optimize`] then
//! simulates, renders and encodes candidate trajectories, compares them
//! with the reference through the motion extractor and updates the scaled
//! coefficients with Adam moments on central-difference gradients.

mod backend;
mod optimize;
mod parse;
mod prompt;

use thiserror::Error;

use crate::material::{ClampEvent, MaterialError, MaterialParams};

pub use backend::{
    prompt_hash, HttpBackend, LlmBackend, MockBackend, ReplayBackend, TranscriptEntry, AXE_PROMPT,
    ELASTIC_BLOCK_PROMPT, ENDPOINT_ENV, HONEY_PROMPT, TOKEN_ENV,
};
pub use optimize::{
    fd_gradient, features_of, frame_boost_subsequences, loss_for_params, optimize,
    EstimateError, EstimationReport, Evaluation, FdGradient, LossContext, OptimizerConfig,
    ParamSpace, StopReason,
};
pub use parse::{extract_json_object, parse_init_response, ParsedInit};
pub use prompt::{build_prompt, format_bound, InitRequest, RESPONSE_KEYS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InitError {
    #[error("simulation prompt is empty")]
    EmptyPrompt,
    #[error("no JSON object found in answer: {snippet}")]
    NoJsonFound { snippet: String },
    #[error("malformed JSON ({message}): {snippet}")]
    InvalidJson { message: String, snippet: String },
    #[error("answer has no `material_type`: {snippet}")]
    MissingMaterialType { snippet: String },
    #[error("unknown material type {name}: {snippet}")]
    UnknownMaterialType { name: String, snippet: String },
    #[error("unknown field `{field}`: {snippet}")]
    UnknownField { field: String, snippet: String },
    #[error("field `{field}` is not a number: {snippet}")]
    NonNumeric { field: String, snippet: String },
    #[error("{source}: {snippet}")]
    Material {
        source: MaterialError,
        snippet: String,
    },
    #[error("language model backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("initialization failed after {attempts} attempts: {last}")]
    InitFailed { attempts: u32, last: Box<InitError> },
}

/// Accepted initial parameters and how they were obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct Initialization {
    pub params: MaterialParams,
    pub clamps: Vec<ClampEvent>,
    pub transcript: Vec<TranscriptEntry>,
}

/// Asks `backend` for initial parameters. A malformed answer is retried
/// once with the parse error appended to the prompt.
pub fn initialize(
    req: &InitRequest,
    backend: &mut dyn LlmBackend,
) -> Result<Initialization, InitError> {
    if req.prompt.trim().is_empty() {
        return Err(InitError::EmptyPrompt);
    }
    let base = build_prompt(req);
    let mut transcript = Vec::new();
    let mut prompt = base.clone();
    let mut last = None;
    for attempt in 1..=2u32 {
        let response = backend.send(&prompt, req.image.as_deref())?;
        transcript.push(TranscriptEntry {
            backend: backend.name().into(),
            prompt_sha256: prompt_hash(&prompt),
            prompt: prompt.clone(),
            image: req.image.as_ref().map(|p| p.display().to_string()),
            response: response.clone(),
        });
        match parse_init_response(&response) {
            Ok(parsed) => {
                return Ok(Initialization {
                    params: parsed.params,
                    clamps: parsed.clamps,
                    transcript,
                })
            }
            Err(e) if attempt == 1 => {
                prompt = format!(
                    "{base}\nYour previous answer could not be used ({e}). \
                     Reply with the JSON object only.\n"
                );
                last = Some(e);
            }
            Err(e) => last = Some(e),
        }
    }
    Err(InitError::InitFailed {
        attempts: 2,
        last: Box::new(last.expect("two failed attempts")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::MaterialClass;

    #[test]
    fn axe_prompt_initializes_metal() {
        let init = initialize(&InitRequest::new(AXE_PROMPT), &mut MockBackend::builtin()).unwrap();
        assert_eq!(init.params.class, MaterialClass::Metal);
        assert_eq!(init.transcript.len(), 1);
    }

    #[test]
    fn retry_once_then_fail() {
        let req = InitRequest::new("A block of jelly.");
        let base = build_prompt(&req);
        let mut mock = MockBackend::new();
        mock.insert(&base, "I think it is jelly.");
        let err = initialize(&req, &mut mock).unwrap_err();
        // The clarified prompt has no canned answer.
        assert!(matches!(err, InitError::BackendUnavailable(_)));

        let mut replay_entries = Vec::new();
        for answer in ["not json", r#"{"material_type": "Foam", "density": 50}"#] {
            let prompt = if replay_entries.is_empty() {
                base.clone()
            } else {
                format!(
                    "{base}\nYour previous answer could not be used ({}). \
                     Reply with the JSON object only.\n",
                    parse_init_response("not json").unwrap_err()
                )
            };
            replay_entries.push(TranscriptEntry {
                backend: "mock".into(),
                prompt_sha256: prompt_hash(&prompt),
                prompt,
                image: None,
                response: answer.into(),
            });
        }
        let err = initialize(&req, &mut ReplayBackend::new(replay_entries)).unwrap_err();
        assert!(matches!(err, InitError::InitFailed { attempts: 2, .. }), "{err}");
    }

    #[test]
    fn replayed_transcript_reproduces_params() {
        let req = InitRequest::new(ELASTIC_BLOCK_PROMPT);
        let first = initialize(&req, &mut MockBackend::builtin()).unwrap();
        let text = serde_json::to_string(&first.transcript).unwrap();
        let again = initialize(&req, &mut ReplayBackend::from_json(&text).unwrap()).unwrap();
        assert_eq!(first.params, again.params);
    }
}
