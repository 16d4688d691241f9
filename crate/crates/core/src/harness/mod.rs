//! Experiment harness: the goal suite, trials on a simulated clock, the
//! stopping rule, metric tables and reports.

pub mod config;
pub mod fuzz;
pub mod goals;
pub mod oracle;
pub mod replay;
pub mod report;
pub mod session;
pub mod suite;
pub mod trial;

use std::path::PathBuf;

use thiserror::Error;

pub use config::RunConfig;
pub use goals::{goal_spec, parse_goal_list, GoalSpec, SuccessKind};
pub use oracle::{make_backend, oracle, BackendKind, BackendSettings};
pub use session::{Event, Record, Session};
pub use suite::{run_suite, ResultsTable};
pub use trial::{progress, run_default_trial, run_trial, ProgressSnapshot, Termination, TrialConfig, TrialResult};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no goal with id {0} (valid ids are 1-9)")]
    UnknownGoal(u8),
    #[error("bad goal list `{0}`")]
    GoalList(String),
    #[error("repeats must be at least 1")]
    NoRepeats,
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("log {path} line {line}: {message}")]
    Log { path: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Backend(#[from] crate::llm::BackendError),
    #[error(transparent)]
    Llm(#[from] crate::llm::LlmError),
    #[error(transparent)]
    Sim(#[from] crate::simworld::SimError),
    #[error(transparent)]
    Skill(#[from] crate::skills::SkillError),
    #[error(transparent)]
    Director(#[from] crate::director::DirectorError),
    #[error(transparent)]
    Reactor(#[from] crate::reactor::ReactorError),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }
}
