use std::path::Path;
use std::sync::Arc;

use crate::llm::{PromptTemplate, Reason};

use super::oracle::replay_backend;
use super::report::read_trial_log;
use super::session::{Event, Record};
use super::trial::{run_trial, TrialResult};
use super::HarnessError;

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub result: TrialResult,
    pub recorded: usize,
    /// Index of the first record that differs from the log, if any.
    pub diverged_at: Option<usize>,
}

impl ReplayOutcome {
    pub fn matches(&self) -> bool {
        self.diverged_at.is_none()
    }
}

/// Recorded answers in poll order; timed-out polls replay as timeouts.
pub fn recorded_responses(records: &[Record]) -> Vec<Option<String>> {
    records
        .iter()
        .filter_map(|r| match &r.event {
            Event::Poll { decision } if decision.reason == Reason::Timeout && decision.raw.is_empty() => Some(None),
            Event::Poll { decision } => Some(Some(decision.raw.clone())),
            _ => None,
        })
        .collect()
}

/// Rerun a logged trial against its recorded answers and compare logs.
pub fn replay_log(path: &Path) -> Result<ReplayOutcome, HarnessError> {
    let (header, records) = read_trial_log(path)?;
    let backend = replay_backend(recorded_responses(&records));
    let template = PromptTemplate::new(header.template)?;
    let result = run_trial(&header.goal, backend.as_ref(), header.seed, Arc::new(header.sim), &header.trial, template)?;
    let diverged_at = result
        .log
        .iter()
        .zip(&records)
        .position(|(a, b)| a != b)
        .or_else(|| (result.log.len() != records.len()).then(|| result.log.len().min(records.len())));
    Ok(ReplayOutcome { result, recorded: records.len(), diverged_at })
}
