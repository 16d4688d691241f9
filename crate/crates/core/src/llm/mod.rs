//! Language-model task selection: prompt building, backends, response parsing
//! and the periodic poll that feeds the director.

pub mod backend;
pub mod http;
mod layer;
pub mod parse;
pub mod prompt;

use thiserror::Error;

pub use backend::{Backend, BackendError, MixedBackend, Query, ReplayBackend, ScriptedBackend, Visibility};
pub use http::{HttpBackend, HttpConfig};
pub use layer::{Goal, LlmDecision, LlmLayer, PendingPoll};
pub use parse::{classify_executability, parse_output, render_tasks, ParsedTask, Reason};
pub use prompt::PromptTemplate;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("goal text must not be empty")]
    EmptyGoal,
    #[error("prompt template: {0}")]
    Template(String),
    #[error("backend configuration: {0}")]
    Config(String),
}
