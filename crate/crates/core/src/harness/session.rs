//! The closed loop for one robot: world, director, skills and the language
//! model layer. Trials drive it on a simulated clock; the gateway drives it
//! on the wall clock.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::actuation::{ActuatorCommand, Point, Resource};
use crate::director::{Assignment, Director, Source, TaskName};
use crate::llm::{BackendError, Goal, LlmDecision, LlmError, LlmLayer, PendingPoll, PromptTemplate};
use crate::simworld::{inject_fall, reset, step, Scenario, SimConfig, SimFrame, WorldState};
use crate::skills::{bind_registry, safety_monitor, BoundRegistry};

use super::trial::Termination;
use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    pub tick: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Goal { text: String },
    Poll { decision: LlmDecision },
    PollSkipped,
    Progress { progressed: bool, streak: u32 },
    Assignment {
        holds: BTreeMap<Resource, TaskName>,
        /// Blocked task -> task whose provider stands in for it.
        substitutions: BTreeMap<TaskName, TaskName>,
        suspended: Vec<TaskName>,
    },
    Fall,
    Upright,
    Kick { ball: Point },
    Violation { task: TaskName, resource: Resource },
    Reset { scenario: Scenario, seed: u64 },
    End { termination: Termination },
}

pub struct Session {
    config: Arc<SimConfig>,
    frame: SimFrame,
    director: Director<SimFrame>,
    registry: BoundRegistry,
    llm: LlmLayer,
    goal: Goal,
    last_decision: Option<LlmDecision>,
    last_logged: Option<(BTreeMap<Resource, TaskName>, BTreeMap<TaskName, TaskName>, Vec<TaskName>)>,
    log: Vec<Record>,
}

impl Session {
    pub fn new(
        config: Arc<SimConfig>,
        scenario: Scenario,
        seed: u64,
        template: PromptTemplate,
        goal_text: &str,
    ) -> Result<Self, HarnessError> {
        config.field.validate()?;
        let mut director = Director::new();
        let registry = bind_registry(&mut director)?;
        let llm = LlmLayer::new(template, registry.llm_tasks.clone(), seed);
        let frame = SimFrame::new(reset(scenario, seed, &config), config.clone());
        let goal = Goal::new(goal_text, 0.0)?;
        let mut s = Session { config, frame, director, registry, llm, goal, last_decision: None, last_logged: None, log: Vec::new() };
        s.record(Event::Goal { text: goal_text.to_string() });
        Ok(s)
    }

    /// Sim time derived from the tick count, so it carries no rounding drift.
    pub fn now(&self) -> f64 {
        self.frame.state.tick as f64 / self.config.physics.tick_hz
    }

    pub fn config(&self) -> &Arc<SimConfig> {
        &self.config
    }

    pub fn frame(&self) -> &SimFrame {
        &self.frame
    }

    pub fn world(&self) -> &WorldState {
        &self.frame.state
    }

    /// Direct world access for scenario tooling and tests.
    pub fn world_mut(&mut self) -> &mut WorldState {
        &mut self.frame.state
    }

    pub fn assignment(&self) -> &Assignment {
        self.director.assignment()
    }

    pub fn registry(&self) -> &BoundRegistry {
        &self.registry
    }

    pub fn director(&self) -> &Director<SimFrame> {
        &self.director
    }

    pub fn goal(&self) -> &Goal {
        &self.goal
    }

    pub fn last_decision(&self) -> Option<&LlmDecision> {
        self.last_decision.as_ref()
    }

    pub fn llm(&self) -> &LlmLayer {
        &self.llm
    }

    pub fn log(&self) -> &[Record] {
        &self.log
    }

    pub fn take_log(&mut self) -> Vec<Record> {
        std::mem::take(&mut self.log)
    }

    pub fn record(&mut self, event: Event) {
        let r = Record { t: self.now(), tick: self.frame.state.tick, event };
        self.log.push(r);
    }

    pub fn set_goal(&mut self, text: &str) -> Result<(), LlmError> {
        self.goal = Goal::new(text, self.now())?;
        self.record(Event::Goal { text: text.to_string() });
        Ok(())
    }

    pub fn push_over(&mut self) {
        if !self.frame.state.fallen {
            self.frame.state = inject_fall(&self.frame.state, &self.config);
            self.record(Event::Fall);
        }
    }

    /// Fresh world; the goal survives, requested tasks do not.
    pub fn reset(&mut self, scenario: Scenario, seed: u64) {
        self.frame.state = reset(scenario, seed, &self.config);
        self.director.submit_tasks(Source::Llm, &[]).expect("empty submission is valid");
        self.director.submit_tasks(Source::Safety, &[]).expect("empty submission is valid");
        self.last_decision = None;
        self.last_logged = None;
        self.record(Event::Reset { scenario, seed });
    }

    /// One physics tick: safety monitor, arbitration, commands, world step.
    pub fn tick(&mut self) -> Result<Vec<ActuatorCommand>, HarnessError> {
        safety_monitor(&mut self.director, &self.frame);
        self.director.resolve(&self.frame);
        self.log_assignment();
        let dt = self.config.physics.dt();
        let commands = self.director.tick(&self.frame, dt)?;
        for v in self.director.take_violations() {
            tracing::warn!(task = %v.task.as_str(), resource = v.command.resource.as_str(), "command dropped");
            self.record(Event::Violation { task: v.task, resource: v.command.resource });
        }
        let before = self.frame.state.clone();
        self.frame.state = step(&before, &commands, dt, &self.config)?;
        if before.fallen && !self.frame.state.fallen {
            self.record(Event::Upright);
        }
        if self.frame.state.kicks > before.kicks {
            let ball = self.frame.state.ball;
            self.record(Event::Kick { ball });
        }
        Ok(commands)
    }

    fn log_assignment(&mut self) {
        let a = self.director.assignment();
        let subs: BTreeMap<TaskName, TaskName> = a
            .substitutions
            .iter()
            .filter_map(|s| Some((s.blocked.clone(), self.director.descriptor(s.provider)?.provides.clone())))
            .collect();
        let current = (a.holds.clone(), subs, a.suspended.clone());
        if self.last_logged.as_ref() != Some(&current) {
            self.last_logged = Some(current.clone());
            let (holds, substitutions, suspended) = current;
            self.record(Event::Assignment { holds, substitutions, suspended });
        }
    }

    /// Build the next query from the current observation, unless one is
    /// already outstanding.
    pub fn begin_poll(&mut self) -> Option<PendingPoll> {
        let obs = self.frame.observe();
        let now = self.now();
        let pending = self.llm.begin(&self.goal, obs, now);
        if pending.is_none() {
            self.record(Event::PollSkipped);
        }
        pending
    }

    /// Apply an answered query: the parsed tasks replace the language-model
    /// request set, or clear it if the answer was not executable.
    pub fn finish_poll(&mut self, pending: PendingPoll, answer: Result<String, BackendError>) -> &LlmDecision {
        let decision = self.llm.finish(pending, answer);
        self.director
            .submit_tasks(Source::Llm, &decision.submission())
            .expect("executable decisions carry registered tasks at valid priorities");
        self.record(Event::Poll { decision: decision.clone() });
        self.last_decision.insert(decision)
    }
}
