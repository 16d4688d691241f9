use serde::{Deserialize, Serialize};

use crate::director::{TaskName, TaskRequest};
use crate::simworld::BallObservation;

use super::backend::{Backend, BackendError, Query};
use super::parse::{classify_executability, parse_output, ParsedTask, Reason};
use super::prompt::PromptTemplate;
use super::LlmError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    text: String,
    issued_at: f64,
}

impl Goal {
    pub fn new(text: impl Into<String>, issued_at: f64) -> Result<Self, LlmError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(LlmError::EmptyGoal);
        }
        Ok(Goal { text, issued_at })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn issued_at(&self) -> f64 {
        self.issued_at
    }
}

/// One poll, start to finish. Also the transcript record format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmDecision {
    pub t: f64,
    pub poll: u64,
    pub request: String,
    pub observation: BallObservation,
    pub prompt: String,
    pub raw: String,
    pub parsed: Vec<ParsedTask>,
    pub executable: bool,
    pub reason: Reason,
}

impl LlmDecision {
    /// Task set to submit for the language-model source. Empty unless the
    /// response was executable.
    pub fn submission(&self) -> Vec<TaskRequest> {
        if !self.executable {
            return Vec::new();
        }
        self.parsed
            .iter()
            .map(|p| {
                let task = TaskName::new(p.task.clone()).expect("executable tasks are registered names");
                TaskRequest::new(task, p.priority as u32)
            })
            .collect()
    }
}

/// A query that has been built but not yet answered.
#[derive(Debug, Clone)]
pub struct PendingPoll {
    pub query: Query,
    pub t: f64,
}

pub struct LlmLayer {
    template: PromptTemplate,
    registry: Vec<TaskName>,
    seed: u64,
    polls: u64,
    skipped: u64,
    in_flight: bool,
}

impl LlmLayer {
    pub fn new(template: PromptTemplate, registry: Vec<TaskName>, seed: u64) -> Self {
        LlmLayer { template, registry, seed, polls: 0, skipped: 0, in_flight: false }
    }

    pub fn registry(&self) -> &[TaskName] {
        &self.registry
    }

    pub fn polls(&self) -> u64 {
        self.polls
    }

    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn in_flight(&self) -> bool {
        self.in_flight
    }

    /// Build the prompt from a fresh observation. Returns `None`, and counts a
    /// skip, while an earlier query is still outstanding.
    pub fn begin(&mut self, goal: &Goal, obs: BallObservation, t: f64) -> Option<PendingPoll> {
        if self.in_flight {
            self.skipped += 1;
            tracing::info!(t, "poll skipped: query still in flight");
            return None;
        }
        self.in_flight = true;
        let query = Query {
            prompt: self.template.render(goal.text(), &obs),
            request: goal.text().to_string(),
            observation: obs,
            poll_index: self.polls,
            seed: self.seed,
        };
        self.polls += 1;
        Some(PendingPoll { query, t })
    }

    /// Parse and classify a backend answer. Any backend failure yields a
    /// non-executable decision with reason `timeout`.
    pub fn finish(&mut self, pending: PendingPoll, answer: Result<String, BackendError>) -> LlmDecision {
        self.in_flight = false;
        let Query { prompt, request, observation, poll_index, .. } = pending.query;
        let (raw, parsed, executable, reason) = match answer {
            Ok(raw) => {
                let parsed = parse_output(&raw);
                let (ok, reason) = classify_executability(&parsed, &self.registry);
                (raw, parsed, ok, reason)
            }
            Err(e) => {
                tracing::warn!(error = %e, poll = poll_index, "backend query failed");
                (String::new(), Vec::new(), false, Reason::Timeout)
            }
        };
        if !executable {
            tracing::info!(poll = poll_index, %reason, raw = %raw, "non-executable output");
        }
        LlmDecision { t: pending.t, poll: poll_index, request, observation, prompt, raw, parsed, executable, reason }
    }

    /// Build, query synchronously, parse and classify.
    pub fn poll(&mut self, backend: &dyn Backend, goal: &Goal, obs: BallObservation, t: f64) -> Option<LlmDecision> {
        let pending = self.begin(goal, obs, t)?;
        let answer = backend.complete(&pending.query);
        Some(self.finish(pending, answer))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::backend::ScriptedBackend;
    use crate::skills::tasks::LLM_VISIBLE;

    fn layer() -> LlmLayer {
        let reg = LLM_VISIBLE.iter().map(|t| TaskName::new(*t).unwrap()).collect();
        LlmLayer::new(PromptTemplate::default(), reg, 1)
    }

    struct Failing;
    impl Backend for Failing {
        fn name(&self) -> &str {
            "failing"
        }
        fn complete(&self, _: &Query) -> Result<String, BackendError> {
            Err(BackendError::Status(429))
        }
    }

    #[test]
    fn executable_poll_yields_submission() {
        let mut l = layer();
        let b = ScriptedBackend::constant("c", "Task: TurnOnSpot Priority: 1 Task: LookAround Priority: 2");
        let goal = Goal::new("Approach the ball", 0.0).unwrap();
        let d = l.poll(&b, &goal, BallObservation::NEVER_SEEN, 2.0).unwrap();
        assert!(d.executable);
        assert_eq!(d.reason, Reason::Ok);
        assert_eq!(d.parsed, vec![ParsedTask::new("TurnOnSpot", 1), ParsedTask::new("LookAround", 2)]);
        assert_eq!(d.submission().len(), 2);
        assert!(d.prompt.contains("Ball is not visible, last seen never"));
        assert_eq!(l.polls(), 1);
    }

    #[test]
    fn faulty_and_prose_outputs_submit_nothing() {
        let mut l = layer();
        let goal = Goal::new("Jump", 0.0).unwrap();
        let jump = ScriptedBackend::constant("faulty", "Task: Jump Priority: 1");
        let d = l.poll(&jump, &goal, BallObservation::NEVER_SEEN, 2.0).unwrap();
        assert!(!d.executable);
        assert_eq!(d.reason, Reason::UnknownTask("Jump".into()));
        assert!(d.submission().is_empty());

        let prose = ScriptedBackend::constant("prose", "I would jump if I could.");
        let d = l.poll(&prose, &goal, BallObservation::NEVER_SEEN, 4.0).unwrap();
        assert_eq!(d.reason, Reason::NoMatch);
        assert!(d.submission().is_empty());
    }

    #[test]
    fn transport_failure_is_a_timeout_decision() {
        let mut l = layer();
        let goal = Goal::new("Find the ball", 0.0).unwrap();
        let d = l.poll(&Failing, &goal, BallObservation::NEVER_SEEN, 2.0).unwrap();
        assert!(!d.executable);
        assert_eq!(d.reason, Reason::Timeout);
    }

    #[test]
    fn overlapping_polls_are_skipped() {
        let mut l = layer();
        let goal = Goal::new("Find the ball", 0.0).unwrap();
        let pending = l.begin(&goal, BallObservation::NEVER_SEEN, 2.0).unwrap();
        assert!(l.begin(&goal, BallObservation::NEVER_SEEN, 4.0).is_none());
        assert_eq!(l.skipped(), 1);
        let d = l.finish(pending, Ok("Task: Wave Priority: 1".into()));
        assert!(d.executable);
        assert!(l.begin(&goal, BallObservation::NEVER_SEEN, 6.0).is_some());
    }

    #[test]
    fn empty_goal_rejected() {
        assert_eq!(Goal::new("  ", 0.0).unwrap_err(), LlmError::EmptyGoal);
    }
}
