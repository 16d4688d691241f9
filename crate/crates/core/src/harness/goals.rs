use serde::{Deserialize, Serialize};

use crate::simworld::Scenario;

use super::HarnessError;

pub const SWAP_REQUEST: &str = "stand still and wave";

/// Which success predicate a goal is judged by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessKind {
    /// Ball continuously visible for the configured duration.
    BallFound,
    /// Robot within the approach distance of the ball.
    BallReached,
    /// After the request swap, `Wave` and `StandStill` both held long enough.
    StandAndWave,
    /// A kick moved the ball after `WalkToBall` had run.
    KickedAfterApproach,
    /// Ball in the opponent goal.
    Scored,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestChange {
    pub at: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec {
    pub id: u8,
    pub request: String,
    pub change: Option<RequestChange>,
    /// Sim time at which the robot is knocked over.
    pub fall_at: Option<f64>,
    pub success: SuccessKind,
    pub feasible: bool,
    pub scenario: Scenario,
}

/// Knock-over time for goal 3: mid-walk, well before the ball is reached.
pub const GOAL3_FALL_AT: f64 = 9.0;

pub fn goal_spec(id: u8) -> Result<GoalSpec, HarnessError> {
    let (request, success) = match id {
        1 => ("Find the ball", SuccessKind::BallFound),
        2 | 3 | 4 => ("Approach the ball", SuccessKind::BallReached),
        5 => ("Approach and kick the ball", SuccessKind::KickedAfterApproach),
        6 => ("Play soccer", SuccessKind::Scored),
        7 => ("Playing soccer", SuccessKind::Scored),
        8 => ("Pick up the ball", SuccessKind::Infeasible),
        9 => ("Jump", SuccessKind::Infeasible),
        other => return Err(HarnessError::UnknownGoal(other)),
    };
    let mut spec = GoalSpec {
        id,
        request: request.to_string(),
        change: None,
        fall_at: None,
        success,
        feasible: success != SuccessKind::Infeasible,
        scenario: Scenario::Standard,
    };
    match id {
        3 => spec.fall_at = Some(GOAL3_FALL_AT),
        4 => {
            spec.change = Some(RequestChange { at: 20.0, text: SWAP_REQUEST.to_string() });
            spec.success = SuccessKind::StandAndWave;
        }
        _ => {}
    }
    Ok(spec)
}

impl GoalSpec {
    /// Same goal, started facing the ball.
    pub fn facing_ball(mut self) -> Self {
        self.scenario = Scenario::FacingBall;
        self
    }

    /// Request text in force at time `t`.
    pub fn request_at(&self, t: f64) -> &str {
        match &self.change {
            Some(c) if t >= c.at => &c.text,
            _ => &self.request,
        }
    }
}

/// Parse `1-9`, `2`, `1,3,5-7` into ascending unique goal ids.
pub fn parse_goal_list(text: &str) -> Result<Vec<u8>, HarnessError> {
    let bad = || HarnessError::GoalList(text.to_string());
    let mut ids = Vec::new();
    for part in text.split(',').map(str::trim) {
        let (lo, hi) = match part.split_once('-') {
            Some((a, b)) => (a.trim().parse::<u8>().map_err(|_| bad())?, b.trim().parse::<u8>().map_err(|_| bad())?),
            None => {
                let v = part.parse::<u8>().map_err(|_| bad())?;
                (v, v)
            }
        };
        if lo > hi {
            return Err(bad());
        }
        for id in lo..=hi {
            goal_spec(id)?;
            ids.push(id);
        }
    }
    ids.sort_unstable();
    ids.dedup();
    Ok(ids)
}
