//! Scripted stand-in for the language model, and backend selection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::director::TaskName;
use crate::llm::{classify_executability, parse_output, Backend, HttpBackend, HttpConfig, LlmError, MixedBackend, ReplayBackend, ScriptedBackend, Visibility};

use crate::skills::tasks::LLM_VISIBLE;

use super::goals::{goal_spec, SWAP_REQUEST};

pub const SEARCH: &str = "Task: TurnOnSpot Priority: 1 Task: LookAround Priority: 2";
pub const JUMP: &str = "Task: Jump Priority: 1";
const STAND: &str = "Task: StandStill Priority: 1";
const PLAY: &str = "Task: WalkToBall Priority: 2\nTask: KickBall Priority: 3";

/// `(request, visibility) -> response` for every Table 1 request plus the
/// goal 4 follow-up.
pub fn oracle_policy() -> BTreeMap<(String, Visibility), String> {
    use Visibility::*;
    let mut p = BTreeMap::new();
    let mut put = |req: &str, vis: Visibility, text: &str| {
        p.insert((req.to_string(), vis), text.to_string());
    };
    for req in ["Find the ball", "Approach the ball", "Approach and kick the ball", "Play soccer", "Playing soccer", "Jump"] {
        put(req, NotVisible, SEARCH);
    }
    put("Find the ball", Visible, "Task: LookAtBall Priority: 1");
    put("Approach the ball", Visible, "Task: WalkToBall Priority: 1");
    for req in ["Approach and kick the ball", "Play soccer", "Playing soccer"] {
        put(req, Visible, PLAY);
    }
    put("Jump", Visible, JUMP);
    for vis in Visibility::BOTH {
        put(SWAP_REQUEST, vis, "Task: StandStill Priority: 1\nTask: Wave Priority: 1");
        put("Pick up the ball", vis, STAND);
    }
    p
}

pub fn oracle() -> ScriptedBackend {
    let mut required: Vec<String> = (1..=9).map(|i| goal_spec(i).expect("ids 1-9 exist").request).collect();
    required.push(SWAP_REQUEST.to_string());
    let required: Vec<&str> = required.iter().map(String::as_str).collect();
    ScriptedBackend::new("scripted", oracle_policy(), &required)
        .expect("oracle policy covers every goal")
        .with_fallback(STAND)
}

/// The oracle with every non-executable answer replaced by `StandStill`.
pub fn executable_oracle() -> ScriptedBackend {
    let registry: Vec<TaskName> = LLM_VISIBLE.iter().map(|t| TaskName::new(*t).expect("non-empty")).collect();
    let policy = oracle_policy()
        .into_iter()
        .map(|(k, v)| {
            let (ok, _) = classify_executability(&parse_output(&v), &registry);
            (k, if ok { v } else { STAND.to_string() })
        })
        .collect();
    ScriptedBackend::new("scripted", policy, &[]).expect("no required entries").with_fallback(STAND)
}

/// Always asks for a task that does not exist.
pub fn faulty() -> ScriptedBackend {
    ScriptedBackend::constant("faulty", JUMP)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Scripted,
    Faulty,
    Mixed,
    Http,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Scripted => "scripted",
            BackendKind::Faulty => "faulty",
            BackendKind::Mixed => "mixed",
            BackendKind::Http => "http",
        }
    }
}

impl std::str::FromStr for BackendKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scripted" => Ok(BackendKind::Scripted),
            "faulty" => Ok(BackendKind::Faulty),
            "mixed" => Ok(BackendKind::Mixed),
            "http" => Ok(BackendKind::Http),
            other => Err(format!("unknown backend `{other}` (scripted, faulty, mixed, http)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSettings {
    /// Probability that the mixed backend answers like the oracle.
    pub mixed_p_valid: f64,
    pub http: HttpConfig,
}

impl Default for BackendSettings {
    fn default() -> Self {
        BackendSettings { mixed_p_valid: 0.5, http: HttpConfig::default() }
    }
}

pub fn make_backend(kind: BackendKind, settings: &BackendSettings) -> Result<Box<dyn Backend>, LlmError> {
    Ok(match kind {
        BackendKind::Scripted => Box::new(oracle()),
        BackendKind::Faulty => Box::new(faulty()),
        BackendKind::Mixed => {
            if !(0.0..=1.0).contains(&settings.mixed_p_valid) {
                return Err(LlmError::Config("mixed_p_valid must lie in [0, 1]".into()));
            }
            Box::new(MixedBackend::new(Box::new(executable_oracle()), JUMP, settings.mixed_p_valid))
        }
        BackendKind::Http => Box::new(HttpBackend::new(settings.http.clone())?),
    })
}

pub fn replay_backend(responses: Vec<Option<String>>) -> Box<dyn Backend> {
    Box::new(ReplayBackend::from_records(responses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::Query;
    use crate::simworld::BallObservation;

    fn ask(b: &dyn Backend, request: &str, visible: bool) -> String {
        let observation = if visible {
            BallObservation { visible: true, last_seen: Some(0.0), distance: Some(0.7) }
        } else {
            BallObservation::NEVER_SEEN
        };
        b.complete(&Query { prompt: String::new(), request: request.into(), observation, poll_index: 0, seed: 0 }).unwrap()
    }

    #[test]
    fn oracle_answers() {
        let o = oracle();
        assert_eq!(ask(&o, "Approach the ball", false), SEARCH);
        assert_eq!(ask(&o, "Approach the ball", true), "Task: WalkToBall Priority: 1");
        assert_eq!(ask(&o, "Jump", false), SEARCH);
        assert_eq!(ask(&o, "Jump", true), JUMP);
        assert_eq!(ask(&o, "stand still and wave", false), "Task: StandStill Priority: 1\nTask: Wave Priority: 1");
        assert_eq!(ask(&o, "sing", true), STAND);
        assert_eq!(ask(&faulty(), "Find the ball", true), JUMP);
        assert_eq!(ask(&executable_oracle(), "Jump", true), STAND);
        assert_eq!(ask(&executable_oracle(), "Jump", false), SEARCH);
    }

    #[test]
    fn backend_kinds_parse() {
        for k in [BackendKind::Scripted, BackendKind::Faulty, BackendKind::Mixed, BackendKind::Http] {
            assert_eq!(k.as_str().parse::<BackendKind>().unwrap(), k);
        }
        assert!("gpt".parse::<BackendKind>().is_err());
        let bad = BackendSettings { mixed_p_valid: 2.0, ..BackendSettings::default() };
        assert!(make_backend(BackendKind::Mixed, &bad).is_err());
    }
}
