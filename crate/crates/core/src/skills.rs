//! The task providers available to the robot.
//!
//! Seven tasks are visible to the language model. Two more are internal:
//! `StopWalking` brings the legs to a stable stance so a kick can follow a
//! walk, and `Getup` is requested by the safety monitor whenever the robot is
//! down.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use serde::Serialize;
use thiserror::Error;

use crate::actuation::{Action, ActuatorCommand, Resource};
use crate::director::{Commander, Director, DirectorError, ProviderDescriptor, ProviderId, Source, TaskName, TaskRequest};
use crate::simworld::{ball_in_reach, conditions::*, SimFrame};

pub mod tasks {
    pub const WALK_TO_BALL: &str = "WalkToBall";
    pub const KICK_BALL: &str = "KickBall";
    pub const LOOK_AROUND: &str = "LookAround";
    pub const LOOK_AT_BALL: &str = "LookAtBall";
    pub const STAND_STILL: &str = "StandStill";
    pub const TURN_ON_SPOT: &str = "TurnOnSpot";
    pub const WAVE: &str = "Wave";
    pub const STOP_WALKING: &str = "StopWalking";
    pub const GETUP: &str = "Getup";

    /// Names the language model may request, in prompt order.
    pub const LLM_VISIBLE: [&str; 7] = [WALK_TO_BALL, KICK_BALL, LOOK_AROUND, LOOK_AT_BALL, STAND_STILL, TURN_ON_SPOT, WAVE];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillKind {
    /// Requestable by the language model.
    Task,
    /// Only ever runs as a substitution.
    Transitional,
    /// Requested by the safety monitor.
    Safety,
}

pub struct SkillBinding {
    pub descriptor: ProviderDescriptor,
    pub kind: SkillKind,
    pub commander: Commander<SimFrame>,
}

#[derive(Debug, Error)]
pub enum SkillError {
    #[error("director already has {0} providers registered")]
    AlreadyBound(usize),
    #[error(transparent)]
    Director(#[from] DirectorError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRegistry {
    pub providers: Vec<(TaskName, ProviderId, SkillKind)>,
    /// Task names exposed to the language model.
    pub llm_tasks: Vec<TaskName>,
}

impl BoundRegistry {
    pub fn kind_of(&self, task: &TaskName) -> Option<SkillKind> {
        self.providers.iter().find(|(t, _, _)| t == task).map(|(_, _, k)| *k)
    }
}

fn task(name: &str) -> TaskName {
    TaskName::new(name).expect("skill names are non-empty constants")
}

fn binding(kind: SkillKind, descriptor: ProviderDescriptor, f: impl Fn(&SimFrame, f64) -> Vec<ActuatorCommand> + 'static) -> SkillBinding {
    SkillBinding { descriptor, kind, commander: Box::new(f) }
}

fn legs(action: Action) -> ActuatorCommand {
    ActuatorCommand::new(Resource::Legs, action)
}

fn head(action: Action) -> ActuatorCommand {
    ActuatorCommand::new(Resource::Head, action)
}

/// All nine skills in registration order.
pub fn skill_set() -> Vec<SkillBinding> {
    use tasks::*;
    use Resource::*;
    vec![
        binding(
            SkillKind::Task,
            ProviderDescriptor::new(task(WALK_TO_BALL), [Legs, Head]).when([UPRIGHT, BALL_VISIBLE]),
            |f, _| {
                let ball = f.state.ball;
                // Stops once the ball is kickable.
                let gait = if ball_in_reach(&f.state, &f.config) { Action::Hold } else { Action::WalkToward { target: ball } };
                vec![legs(gait), head(Action::Fixate { target: ball })]
            },
        ),
        binding(
            SkillKind::Task,
            ProviderDescriptor::new(task(KICK_BALL), [Legs]).when([UPRIGHT, STABLE_STANCE, BALL_IN_REACH]),
            |_, _| vec![legs(Action::Kick)],
        ),
        binding(
            SkillKind::Task,
            ProviderDescriptor::new(task(LOOK_AROUND), [Head]).when([UPRIGHT]),
            |_, _| vec![head(Action::PanScan)],
        ),
        binding(
            SkillKind::Task,
            ProviderDescriptor::new(task(LOOK_AT_BALL), [Head]).when([UPRIGHT, BALL_VISIBLE]),
            |f, _| vec![head(Action::Fixate { target: f.state.ball })],
        ),
        binding(
            SkillKind::Task,
            ProviderDescriptor::new(task(STAND_STILL), [Legs]).when([UPRIGHT]),
            |_, _| vec![legs(Action::Hold)],
        ),
        binding(
            SkillKind::Task,
            ProviderDescriptor::new(task(TURN_ON_SPOT), [Legs]).when([UPRIGHT]),
            // Clockwise.
            |f, _| vec![legs(Action::Turn { rate: -f.config.physics.turn_rate })],
        ),
        binding(SkillKind::Task, ProviderDescriptor::new(task(WAVE), [Arms]).when([UPRIGHT]), |f, _| {
            let phase = (TAU * f.config.physics.wave_hz * f.state.clock).rem_euclid(TAU);
            vec![ActuatorCommand::new(Arms, Action::Wave { phase })]
        }),
        binding(
            SkillKind::Transitional,
            ProviderDescriptor::new(task(STOP_WALKING), [Legs]).causing(STABLE_STANCE),
            |_, _| vec![legs(Action::Hold)],
        ),
        binding(
            SkillKind::Safety,
            ProviderDescriptor::new(task(GETUP), [Legs, Arms, Head]).when([FALLEN]),
            |_, _| Resource::ALL.iter().map(|r| ActuatorCommand::new(*r, Action::GetupTrajectory)).collect(),
        ),
    ]
}

/// Register every skill with an empty director.
pub fn bind_registry(director: &mut Director<SimFrame>) -> Result<BoundRegistry, SkillError> {
    if director.provider_count() > 0 {
        return Err(SkillError::AlreadyBound(director.provider_count()));
    }
    let mut providers = Vec::new();
    for skill in skill_set() {
        let name = skill.descriptor.provides.clone();
        let id = director.register_provider(skill.descriptor, skill.commander)?;
        providers.push((name, id, skill.kind));
    }
    let llm_tasks = providers.iter().filter(|(_, _, k)| *k == SkillKind::Task).map(|(t, _, _)| t.clone()).collect();
    Ok(BoundRegistry { providers, llm_tasks })
}

/// Requests the safety tier should hold for this world: `Getup` while fallen,
/// nothing otherwise.
pub fn safety_requests(fallen: bool) -> Vec<TaskRequest> {
    if fallen {
        vec![TaskRequest::new(task(tasks::GETUP), 1)]
    } else {
        Vec::new()
    }
}

/// Evaluate the safety monitor and submit its task set under the safety tier.
pub fn safety_monitor(director: &mut Director<SimFrame>, frame: &SimFrame) {
    director
        .submit_tasks(Source::Safety, &safety_requests(frame.state.fallen))
        .expect("safety requests always carry priority 1");
}

pub fn resources_of(names: &[&str], director: &Director<SimFrame>) -> BTreeSet<Resource> {
    names
        .iter()
        .filter_map(|n| director.provider_for(&task(n)))
        .filter_map(|id| director.descriptor(id))
        .flat_map(|d| d.needs.iter().copied())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actuation::Point;
    use crate::simworld::{inject_fall, reset, Scenario, SimConfig};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn bound() -> (Director<SimFrame>, BoundRegistry) {
        let mut d = Director::new();
        let reg = bind_registry(&mut d).unwrap();
        (d, reg)
    }

    #[test]
    fn binds_nine_providers_and_seven_visible_tasks() {
        let (mut d, reg) = bound();
        assert_eq!(reg.providers.len(), 9);
        let names: Vec<&str> = reg.llm_tasks.iter().map(|t| t.as_str()).collect();
        assert_eq!(names, tasks::LLM_VISIBLE);
        assert_eq!(reg.kind_of(&task(tasks::GETUP)), Some(SkillKind::Safety));
        assert_eq!(reg.kind_of(&task(tasks::STOP_WALKING)), Some(SkillKind::Transitional));
        assert!(matches!(bind_registry(&mut d), Err(SkillError::AlreadyBound(9))));
        let (_, again) = bound();
        assert_eq!(again, reg, "registration order is stable");
    }

    #[test]
    fn head_tasks_share_only_the_head() {
        let (d, _) = bound();
        assert_eq!(resources_of(&[tasks::LOOK_AROUND, tasks::LOOK_AT_BALL], &d), BTreeSet::from([Resource::Head]));
        assert_eq!(resources_of(&[tasks::WAVE], &d), BTreeSet::from([Resource::Arms]));
    }

    #[test]
    fn safety_monitor_follows_fallen_flag() {
        let (mut d, _) = bound();
        let cfg = Arc::new(SimConfig::default());
        let mut frame = SimFrame::new(reset(Scenario::FacingBall, 0, &cfg), cfg.clone());
        d.submit_tasks(Source::Llm, &[TaskRequest::new(task(tasks::WALK_TO_BALL), 2)]).unwrap();

        safety_monitor(&mut d, &frame);
        assert!(d.requests(Source::Safety).is_empty());
        assert_eq!(d.resolve(&frame).holder(Resource::Legs), Some(&task(tasks::WALK_TO_BALL)));

        frame.state = inject_fall(&frame.state, &cfg);
        safety_monitor(&mut d, &frame);
        assert_eq!(d.requests(Source::Safety), vec![TaskRequest::new(task(tasks::GETUP), 1)]);
        let a = d.resolve(&frame).clone();
        for r in Resource::ALL {
            assert_eq!(a.holder(r), Some(&task(tasks::GETUP)));
        }
        assert!(!a.running.contains_key(&task(tasks::WALK_TO_BALL)));
    }

    #[test]
    fn walk_holds_once_ball_is_kickable() {
        let (mut d, _) = bound();
        let cfg = Arc::new(SimConfig::default());
        let mut state = reset(Scenario::FacingBall, 0, &cfg);
        state.ball = Point::new(0.2, 0.0);
        let frame = SimFrame::new(state, cfg);
        d.submit_tasks(Source::Llm, &[TaskRequest::new(task(tasks::WALK_TO_BALL), 1)]).unwrap();
        d.resolve(&frame);
        let cmds = d.tick(&frame, 1.0 / 90.0).unwrap();
        assert_eq!(cmds[0], legs(Action::Hold));
    }

    proptest! {
        #[test]
        fn commanders_stay_within_declared_needs(
            rx in -4.0f64..4.0, ry in -3.0f64..3.0, heading in -3.2f64..3.2,
            bx in -4.5f64..4.5, by in -3.0f64..3.0, clock in 0.0f64..100.0, fallen: bool,
        ) {
            let cfg = Arc::new(SimConfig::default());
            let mut state = reset(Scenario::Standard, 0, &cfg);
            state.robot.position = Point::new(rx, ry);
            state.robot.heading = heading;
            state.ball = Point::new(bx, by);
            state.clock = clock;
            state.fallen = fallen;
            let frame = SimFrame::new(state, cfg);
            for skill in skill_set() {
                let cmds = (skill.commander)(&frame, 1.0 / 90.0);
                prop_assert!(!cmds.is_empty());
                let mut seen = BTreeSet::new();
                for c in cmds {
                    prop_assert!(skill.descriptor.needs.contains(&c.resource));
                    prop_assert!(seen.insert(c.resource));
                }
            }
        }
    }
}
