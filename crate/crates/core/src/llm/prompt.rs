use std::path::Path;

use crate::simworld::BallObservation;

use super::LlmError;

/// Shipped prompt. Slots: `{request}` (twice), `{visibility}`, `{seconds}`,
/// `{distance}`.
pub const DEFAULT_TEMPLATE: &str = include_str!("../../assets/prompt_template.txt");

const REQUIRED_SLOTS: [&str; 4] = ["{request}", "{visibility}", "{seconds}", "{distance}"];
const SIGHTING_CLAUSE: &str = "last seen {seconds} seconds ago {distance} m away from you";
const NEVER_SEEN_CLAUSE: &str = "last seen never";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate { text: DEFAULT_TEMPLATE.to_string() }
    }
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Result<Self, LlmError> {
        let text = text.into();
        if let Some(slot) = REQUIRED_SLOTS.iter().find(|s| !text.contains(*s)) {
            return Err(LlmError::Template(format!("missing slot {slot}")));
        }
        Ok(PromptTemplate { text })
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Template(format!("{}: {e}", path.display())))?;
        Self::new(text)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Fill the slots. Line breaks in the request are flattened to spaces.
    pub fn render(&self, request: &str, obs: &BallObservation) -> String {
        let request = request.replace("\r\n", " ").replace(['\n', '\r'], " ");
        let visibility = if obs.visible { "is visible" } else { "is not visible" };
        let body = match (obs.last_seen, obs.distance) {
            (Some(_), Some(_)) => self.text.clone(),
            _ if self.text.contains(SIGHTING_CLAUSE) => self.text.replace(SIGHTING_CLAUSE, NEVER_SEEN_CLAUSE),
            _ => self.text.replace("{seconds}", "never").replace("{distance}", "unknown"),
        };
        let seconds = obs.last_seen.map(|s| format!("{}", s.round() as u64)).unwrap_or_default();
        let distance = obs.distance.map(|d| format!("{d:.1}")).unwrap_or_default();
        body.replace("{visibility}", visibility)
            .replace("{seconds}", &seconds)
            .replace("{distance}", &distance)
            .replace("{request}", &request)
    }
}
