//! Randomised walk-then-kick episodes for checking soft transitions.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::actuation::{Action, Point, Resource};
use crate::director::{Director, Source, TaskName, TaskRequest};
use crate::simworld::{ball_in_view, reset, step, wrap_angle, Scenario, SimConfig, SimFrame};
use crate::skills::{bind_registry, safety_monitor, tasks};

use super::HarnessError;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SoftTransitionReport {
    pub seed: u64,
    pub ticks: u64,
    pub kicks: u32,
    /// Kicks with a `StopWalking` substitution since the previous kick.
    pub kicks_after_substitution: u32,
    pub kicks_on_stable_stance: u32,
    pub violations: usize,
    /// Ticks where the holds map and the issued commands disagree.
    pub exclusivity_breaches: u32,
}

impl SoftTransitionReport {
    pub fn clean(&self) -> bool {
        self.kicks_after_substitution == self.kicks
            && self.kicks_on_stable_stance == self.kicks
            && self.violations == 0
            && self.exclusivity_breaches == 0
    }
}

fn name(n: &str) -> TaskName {
    TaskName::new(n).expect("non-empty")
}

/// Random start with the ball in view and out of reach, then `{WalkToBall:2,
/// KickBall:3}` for `seconds` of sim time.
pub fn soft_transition_trial(seed: u64, seconds: f64) -> Result<SoftTransitionReport, HarnessError> {
    let cfg = Arc::new(SimConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = reset(Scenario::FacingBall, seed, &cfg);
    let half_l = cfg.field.length / 2.0 - 0.5;
    let half_w = cfg.field.width / 2.0 - 0.5;
    loop {
        let robot = Point::new(rng.random_range(-half_l..half_l), rng.random_range(-half_w..half_w));
        let heading = rng.random_range(-PI..PI);
        let dist = rng.random_range(0.5..3.0);
        let off = rng.random_range(-0.6..0.6);
        let ball = Point::new(robot.x + dist * (heading + off).cos(), robot.y + dist * (heading + off).sin());
        state.robot.position = robot;
        state.robot.heading = wrap_angle(heading);
        state.robot.head_yaw = 0.0;
        state.ball = ball;
        if cfg.field.clamp(ball) == ball && ball_in_view(&state, &cfg) {
            break;
        }
    }
    let mut frame = SimFrame::new(state, cfg.clone());
    let mut director = Director::new();
    bind_registry(&mut director)?;
    director.submit_tasks(Source::Llm, &[TaskRequest::new(name(tasks::WALK_TO_BALL), 2), TaskRequest::new(name(tasks::KICK_BALL), 3)])?;

    let kick = name(tasks::KICK_BALL);
    let stop = name(tasks::STOP_WALKING);
    let stop_id = director.provider_for(&stop).expect("StopWalking is registered");
    let mut report = SoftTransitionReport { seed, ..Default::default() };
    let mut substituted = false;
    let ticks = (seconds * cfg.physics.tick_hz).round() as u64;
    for _ in 0..ticks {
        safety_monitor(&mut director, &frame);
        let a = director.resolve(&frame).clone();
        if a.substitutions.iter().any(|s| s.blocked == kick && s.provider == stop_id) {
            substituted = true;
        }
        let commands = director.tick(&frame, cfg.physics.dt())?;
        report.violations += director.take_violations().len();
        let mut seen = Vec::new();
        for c in &commands {
            if seen.contains(&c.resource) || !a.holds.contains_key(&c.resource) {
                report.exclusivity_breaches += 1;
            }
            seen.push(c.resource);
        }
        if commands.iter().any(|c| c.resource == Resource::Legs && c.action == Action::Kick) {
            report.kicks += 1;
            report.kicks_after_substitution += u32::from(substituted);
            report.kicks_on_stable_stance += u32::from(frame.state.stable_stance);
            substituted = false;
        }
        frame.state = step(&frame.state, &commands, cfg.physics.dt(), &cfg)?;
        report.ticks += 1;
    }
    Ok(report)
}
