use std::fmt;

use serde::{Deserialize, Serialize};

/// Actuator group a provider can hold exclusively.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resource {
    Legs,
    Arms,
    Head,
}

impl Resource {
    pub const ALL: [Resource; 3] = [Resource::Legs, Resource::Arms, Resource::Head];

    pub fn as_str(self) -> &'static str {
        match self {
            Resource::Legs => "legs",
            Resource::Arms => "arms",
            Resource::Head => "head",
        }
    }
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    /// Heading of the vector from `self` to `other`.
    pub fn bearing_to(self, other: Point) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }
}

/// Semantic motion for one actuator group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    WalkToward { target: Point },
    /// Signed yaw rate in rad/s; negative is clockwise.
    Turn { rate: f64 },
    Kick,
    PanScan,
    Fixate { target: Point },
    Hold,
    /// Arm wave at the given phase in radians.
    Wave { phase: f64 },
    GetupTrajectory,
}

impl Action {
    /// Leg actions that move the body and therefore break a stable stance.
    pub fn is_locomotion(&self) -> bool {
        matches!(self, Action::WalkToward { .. } | Action::Turn { .. } | Action::Kick | Action::GetupTrajectory)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorCommand {
    pub resource: Resource,
    pub action: Action,
}

impl ActuatorCommand {
    pub fn new(resource: Resource, action: Action) -> Self {
        ActuatorCommand { resource, action }
    }
}
