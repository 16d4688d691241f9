use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::director::TaskName;

static TASK_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"Task:\s*([A-Za-z_][A-Za-z0-9_]*)\s+Priority:\s*([+-]?\d+)").expect("valid regex"));

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedTask {
    pub task: String,
    /// Saturates at the `i64` range; anything outside `1..=u32::MAX` is
    /// rejected by [`classify_executability`].
    pub priority: i64,
}

impl ParsedTask {
    pub fn new(task: impl Into<String>, priority: i64) -> Self {
        ParsedTask { task: task.into(), priority }
    }
}

/// Why a response was or was not executable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reason {
    Ok,
    NoMatch,
    UnknownTask(String),
    BadPriority,
    Timeout,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reason::Ok => f.write_str("ok"),
            Reason::NoMatch => f.write_str("no-match"),
            Reason::UnknownTask(t) => write!(f, "unknown-task:{t}"),
            Reason::BadPriority => f.write_str("bad-priority"),
            Reason::Timeout => f.write_str("timeout"),
        }
    }
}

impl std::str::FromStr for Reason {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "ok" => Reason::Ok,
            "no-match" => Reason::NoMatch,
            "bad-priority" => Reason::BadPriority,
            "timeout" => Reason::Timeout,
            other => match other.strip_prefix("unknown-task:") {
                Some(t) => Reason::UnknownTask(t.to_string()),
                None => return Err(format!("unknown reason `{other}`")),
            },
        })
    }
}

impl Serialize for Reason {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Reason {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Extract every `Task: <word> Priority: <integer>` in order. Surrounding text
/// is ignored; the task word is case-sensitive.
pub fn parse_output(text: &str) -> Vec<ParsedTask> {
    TASK_LINE
        .captures_iter(text)
        .map(|c| {
            let digits = &c[2];
            let priority = digits.parse::<i64>().unwrap_or(if digits.starts_with('-') { i64::MIN } else { i64::MAX });
            ParsedTask::new(&c[1], priority)
        })
        .collect()
}

/// Render tasks in the response format, one per line.
pub fn render_tasks(tasks: &[ParsedTask]) -> String {
    tasks.iter().map(|t| format!("Task: {} Priority: {}", t.task, t.priority)).collect::<Vec<_>>().join("\n")
}

/// Executable iff there is at least one task, every task is registered and
/// every priority is a positive 32-bit integer. Checks run in that order and
/// the first failure is reported.
pub fn classify_executability(parsed: &[ParsedTask], registry: &[TaskName]) -> (bool, Reason) {
    if parsed.is_empty() {
        return (false, Reason::NoMatch);
    }
    if let Some(unknown) = parsed.iter().find(|p| !registry.iter().any(|r| r.as_str() == p.task)) {
        return (false, Reason::UnknownTask(unknown.task.clone()));
    }
    if parsed.iter().any(|p| p.priority < 1 || p.priority > u32::MAX as i64) {
        return (false, Reason::BadPriority);
    }
    (true, Reason::Ok)
}
