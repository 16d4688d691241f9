use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simworld::BallObservation;

use super::LlmError;

/// Everything a backend may look at when answering one poll.
#[derive(Debug, Clone)]
pub struct Query {
    pub prompt: String,
    pub request: String,
    pub observation: BallObservation,
    pub poll_index: u64,
    pub seed: u64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("endpoint returned status {0}")]
    Status(u16),
    #[error("malformed response body: {0}")]
    Malformed(String),
    #[error("deadline exceeded")]
    Timeout,
    #[error("replay transcript exhausted at poll {0}")]
    Exhausted(u64),
    #[error("no scripted response for request `{0}`")]
    NoPolicy(String),
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, query: &Query) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    Visible,
    NotVisible,
}

impl Visibility {
    pub const BOTH: [Visibility; 2] = [Visibility::Visible, Visibility::NotVisible];

    pub fn of(obs: &BallObservation) -> Self {
        if obs.visible {
            Visibility::Visible
        } else {
            Visibility::NotVisible
        }
    }
}

/// Deterministic policy keyed on (request text, ball visibility).
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    name: String,
    policy: BTreeMap<(String, Visibility), String>,
    fallback: Option<String>,
}

impl ScriptedBackend {
    /// Build a policy and check it answers every `(request, visibility)` pair
    /// for the given requests.
    pub fn new(
        name: impl Into<String>,
        policy: BTreeMap<(String, Visibility), String>,
        required: &[&str],
    ) -> Result<Self, LlmError> {
        for request in required {
            for v in Visibility::BOTH {
                if !policy.contains_key(&(request.to_string(), v)) {
                    return Err(LlmError::Config(format!("scripted policy has no entry for ({request:?}, {v:?})")));
                }
            }
        }
        Ok(ScriptedBackend { name: name.into(), policy, fallback: None })
    }

    /// The same text for every query.
    pub fn constant(name: impl Into<String>, text: impl Into<String>) -> Self {
        ScriptedBackend { name: name.into(), policy: BTreeMap::new(), fallback: Some(text.into()) }
    }

    /// Text returned for requests the policy does not cover.
    pub fn with_fallback(mut self, text: impl Into<String>) -> Self {
        self.fallback = Some(text.into());
        self
    }

    pub fn lookup(&self, request: &str, visibility: Visibility) -> Option<&str> {
        self.policy.get(&(request.to_string(), visibility)).map(String::as_str).or(self.fallback.as_deref())
    }
}

impl Backend for ScriptedBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, q: &Query) -> Result<String, BackendError> {
        self.lookup(&q.request, Visibility::of(&q.observation))
            .map(str::to_string)
            .ok_or_else(|| BackendError::NoPolicy(q.request.clone()))
    }
}

/// Answers from `valid` with probability `p_valid`, otherwise with
/// `invalid_text`. The coin for poll `i` depends only on `(seed, i)`.
pub struct MixedBackend {
    valid: Box<dyn Backend>,
    invalid_text: String,
    p_valid: f64,
}

impl MixedBackend {
    pub fn new(valid: Box<dyn Backend>, invalid_text: impl Into<String>, p_valid: f64) -> Self {
        MixedBackend { valid, invalid_text: invalid_text.into(), p_valid: p_valid.clamp(0.0, 1.0) }
    }
}

impl Backend for MixedBackend {
    fn name(&self) -> &str {
        "mixed"
    }

    fn complete(&self, q: &Query) -> Result<String, BackendError> {
        let mut rng = ChaCha8Rng::seed_from_u64(q.seed ^ 0x6d69_7865_645f_6c6c);
        rng.set_stream(q.poll_index);
        if rng.random_bool(self.p_valid) {
            self.valid.complete(q)
        } else {
            Ok(self.invalid_text.clone())
        }
    }
}

/// Plays back recorded responses by poll index. A `None` entry replays a
/// poll that timed out.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    responses: Vec<Option<String>>,
}

impl ReplayBackend {
    pub fn new(responses: Vec<String>) -> Self {
        ReplayBackend { responses: responses.into_iter().map(Some).collect() }
    }

    pub fn from_records(responses: Vec<Option<String>>) -> Self {
        ReplayBackend { responses }
    }
}

impl Backend for ReplayBackend {
    fn name(&self) -> &str {
        "replay"
    }

    fn complete(&self, q: &Query) -> Result<String, BackendError> {
        match self.responses.get(q.poll_index as usize) {
            Some(Some(text)) => Ok(text.clone()),
            Some(None) => Err(BackendError::Timeout),
            None => Err(BackendError::Exhausted(q.poll_index)),
        }
    }
}
