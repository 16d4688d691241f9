//! Provider/task arbitration.
//!
//! Providers declare the task they provide, the actuator groups they need, the
//! conditions that must hold before they may run (`when`) and optionally a
//! condition they drive the world towards (`causing`). Sources submit task
//! requests with integer priorities. Each [`Director::resolve`] turns the
//! current requests into an [`Assignment`]:
//!
//! 1. A request whose provider has every `when` condition met competes as is.
//! 2. If some conditions are unmet and every unmet one has a registered causer,
//!    the causer of the first unmet condition competes in its place, carrying
//!    the blocked task's source and priority (a substitution).
//! 3. Otherwise the request is blocked this tick and claims nothing.
//!
//! Competing candidates are ranked by source tier, then by whether they are a
//! transition already in progress, then priority, then incumbency, then task
//! name. Each candidate takes all of its resources or none; losers are
//! suspended and compete again next tick.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actuation::{ActuatorCommand, Resource};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TaskName(String);

impl TaskName {
    pub fn new(name: impl Into<String>) -> Result<Self, DirectorError> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(DirectorError::EmptyName);
        }
        Ok(TaskName(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for TaskName {
    type Error = DirectorError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        TaskName::new(s)
    }
}

impl From<TaskName> for String {
    fn from(t: TaskName) -> String {
        t.0
    }
}

impl fmt::Display for TaskName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConditionId(String);

impl ConditionId {
    pub fn new(name: impl Into<String>) -> Self {
        ConditionId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProviderId(pub usize);

/// Root requester. Declaration order is tier order: later variants outrank
/// earlier ones regardless of numeric priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Llm,
    Safety,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRequest {
    pub task: TaskName,
    pub priority: u32,
}

impl TaskRequest {
    pub fn new(task: TaskName, priority: u32) -> Self {
        TaskRequest { task, priority }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderDescriptor {
    pub provides: TaskName,
    pub needs: BTreeSet<Resource>,
    pub when: BTreeSet<ConditionId>,
    pub causing: Option<ConditionId>,
}

impl ProviderDescriptor {
    pub fn new(provides: TaskName, needs: impl IntoIterator<Item = Resource>) -> Self {
        ProviderDescriptor { provides, needs: needs.into_iter().collect(), when: BTreeSet::new(), causing: None }
    }

    pub fn when<I, C>(mut self, conditions: I) -> Self
    where
        I: IntoIterator<Item = C>,
        C: Into<String>,
    {
        self.when.extend(conditions.into_iter().map(|c| ConditionId::new(c)));
        self
    }

    pub fn causing(mut self, condition: impl Into<String>) -> Self {
        self.causing = Some(ConditionId::new(condition));
        self
    }
}

/// Evaluates gating conditions against the current world.
pub trait WorldModel {
    fn condition(&self, id: &ConditionId) -> bool;
}

pub type Commander<W> = Box<dyn Fn(&W, f64) -> Vec<ActuatorCommand>>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DirectorError {
    #[error("task name must not be empty")]
    EmptyName,
    #[error("a provider for `{0}` is already registered")]
    DuplicateProvider(TaskName),
    #[error("provider for `{task}` causes `{condition}`, which no other provider is gated on")]
    UnknownCondition { task: TaskName, condition: ConditionId },
    #[error("provider for `{0}` declares no resources")]
    NoResources(TaskName),
    #[error("request for `{task}` has priority {priority}; priorities start at 1")]
    BadPriority { task: TaskName, priority: u32 },
    #[error("tick() called without a fresh resolve()")]
    NotResolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    pub blocked: TaskName,
    pub provider: ProviderId,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Assignment {
    /// Requested task -> provider actually running on its behalf.
    pub running: BTreeMap<TaskName, ProviderId>,
    pub holds: BTreeMap<Resource, TaskName>,
    pub substitutions: Vec<Substitution>,
    /// Runnable but lost a resource to a higher-ranked request.
    pub suspended: Vec<TaskName>,
    /// Gated on an unmet condition nobody can cause.
    pub blocked: Vec<TaskName>,
    /// Requested with no registered provider.
    pub unprovidable: Vec<TaskName>,
}

impl Assignment {
    pub fn holder(&self, resource: Resource) -> Option<&TaskName> {
        self.holds.get(&resource)
    }

    pub fn resources_of(&self, task: &TaskName) -> BTreeSet<Resource> {
        self.holds.iter().filter(|(_, t)| *t == task).map(|(r, _)| *r).collect()
    }

    pub fn is_substituted(&self, task: &TaskName) -> bool {
        self.substitutions.iter().any(|s| &s.blocked == task)
    }
}

/// A command a provider emitted for a resource its task does not hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub provider: ProviderId,
    pub task: TaskName,
    pub command: ActuatorCommand,
}

struct Provider<W> {
    descriptor: ProviderDescriptor,
    commander: Commander<W>,
}

#[derive(Debug)]
struct Candidate {
    task: TaskName,
    source: Source,
    priority: u32,
    provider: ProviderId,
    needs: BTreeSet<Resource>,
    substitution: bool,
    in_transition: bool,
    incumbent: bool,
}

pub struct Director<W> {
    providers: Vec<Provider<W>>,
    by_task: BTreeMap<TaskName, ProviderId>,
    requests: BTreeMap<Source, BTreeMap<TaskName, u32>>,
    assignment: Assignment,
    fresh: bool,
    violations: Vec<Violation>,
}

impl<W> Default for Director<W> {
    fn default() -> Self {
        Self::new()
    }
}

impl<W> Director<W> {
    pub fn new() -> Self {
        Director {
            providers: Vec::new(),
            by_task: BTreeMap::new(),
            requests: BTreeMap::new(),
            assignment: Assignment::default(),
            fresh: false,
            violations: Vec::new(),
        }
    }

    pub fn register_provider(
        &mut self,
        descriptor: ProviderDescriptor,
        commander: Commander<W>,
    ) -> Result<ProviderId, DirectorError> {
        if self.by_task.contains_key(&descriptor.provides) {
            return Err(DirectorError::DuplicateProvider(descriptor.provides));
        }
        if descriptor.needs.is_empty() {
            return Err(DirectorError::NoResources(descriptor.provides));
        }
        if let Some(cond) = &descriptor.causing {
            let known = self.providers.iter().any(|p| p.descriptor.when.contains(cond));
            if !known {
                return Err(DirectorError::UnknownCondition { task: descriptor.provides, condition: cond.clone() });
            }
        }
        let id = ProviderId(self.providers.len());
        self.by_task.insert(descriptor.provides.clone(), id);
        self.providers.push(Provider { descriptor, commander });
        Ok(id)
    }

    pub fn provider_count(&self) -> usize {
        self.providers.len()
    }

    pub fn descriptor(&self, id: ProviderId) -> Option<&ProviderDescriptor> {
        self.providers.get(id.0).map(|p| &p.descriptor)
    }

    pub fn provider_for(&self, task: &TaskName) -> Option<ProviderId> {
        self.by_task.get(task).copied()
    }

    /// Atomically replace everything `source` currently requests. Duplicate
    /// task names keep their highest priority. Any priority below 1 rejects
    /// the whole submission and leaves the previous set untouched.
    pub fn submit_tasks(&mut self, source: Source, tasks: &[TaskRequest]) -> Result<(), DirectorError> {
        if let Some(bad) = tasks.iter().find(|t| t.priority < 1) {
            return Err(DirectorError::BadPriority { task: bad.task.clone(), priority: bad.priority });
        }
        let mut set = BTreeMap::new();
        for t in tasks {
            let p = set.entry(t.task.clone()).or_insert(t.priority);
            *p = (*p).max(t.priority);
        }
        self.requests.insert(source, set);
        Ok(())
    }

    pub fn requests(&self, source: Source) -> Vec<TaskRequest> {
        self.requests
            .get(&source)
            .map(|set| set.iter().map(|(t, p)| TaskRequest::new(t.clone(), *p)).collect())
            .unwrap_or_default()
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn take_violations(&mut self) -> Vec<Violation> {
        std::mem::take(&mut self.violations)
    }

    fn causer_of(&self, cond: &ConditionId) -> Option<ProviderId> {
        self.providers
            .iter()
            .position(|p| p.descriptor.causing.as_ref() == Some(cond))
            .map(ProviderId)
    }
}

impl<W: WorldModel> Director<W> {
    pub fn resolve(&mut self, world: &W) -> &Assignment {
        let previous = std::mem::take(&mut self.assignment);
        let mut next = Assignment::default();

        // One candidate per task: the highest (tier, priority) request wins.
        let mut wanted: BTreeMap<TaskName, (Source, u32)> = BTreeMap::new();
        for (source, set) in &self.requests {
            for (task, priority) in set {
                let entry = wanted.entry(task.clone()).or_insert((*source, *priority));
                if (*source, *priority) > *entry {
                    *entry = (*source, *priority);
                }
            }
        }

        let mut candidates = Vec::new();
        for (task, (source, priority)) in wanted {
            let Some(&pid) = self.by_task.get(&task) else {
                next.unprovidable.push(task);
                continue;
            };
            let desc = &self.providers[pid.0].descriptor;
            let unmet: Vec<&ConditionId> = desc.when.iter().filter(|c| !world.condition(c)).collect();
            let (provider, substitution) = if unmet.is_empty() {
                (pid, false)
            } else {
                let causers: Option<Vec<ProviderId>> = unmet.iter().map(|c| self.causer_of(c)).collect();
                match causers {
                    Some(causers) => {
                        let causer = causers[0];
                        let causer_ready = self.providers[causer.0].descriptor.when.iter().all(|c| world.condition(c));
                        if !causer_ready || causer == pid {
                            next.blocked.push(task);
                            continue;
                        }
                        (causer, true)
                    }
                    None => {
                        next.blocked.push(task);
                        continue;
                    }
                }
            };
            let needs = self.providers[provider.0].descriptor.needs.clone();
            let incumbent = needs.iter().any(|r| previous.holds.get(r) == Some(&task));
            let in_transition = substitution
                && previous.substitutions.iter().any(|s| s.blocked == task && s.provider == provider)
                && incumbent;
            candidates.push(Candidate { task, source, priority, provider, needs, substitution, in_transition, incumbent });
        }

        candidates.sort_by(|a, b| {
            b.source
                .cmp(&a.source)
                .then(b.in_transition.cmp(&a.in_transition))
                .then(b.priority.cmp(&a.priority))
                .then(b.incumbent.cmp(&a.incumbent))
                .then(a.task.cmp(&b.task))
        });

        for c in candidates {
            if c.needs.iter().any(|r| next.holds.contains_key(r)) {
                next.suspended.push(c.task);
                continue;
            }
            for r in &c.needs {
                next.holds.insert(*r, c.task.clone());
            }
            if c.substitution {
                next.substitutions.push(Substitution { blocked: c.task.clone(), provider: c.provider });
            }
            next.running.insert(c.task, c.provider);
        }

        self.assignment = next;
        self.fresh = true;
        &self.assignment
    }

    /// Collect commands from every running provider. Commands for resources the
    /// task does not hold, or repeats for a resource, are dropped and recorded
    /// as violations.
    pub fn tick(&mut self, world: &W, dt: f64) -> Result<Vec<ActuatorCommand>, DirectorError> {
        if !self.fresh {
            return Err(DirectorError::NotResolved);
        }
        self.fresh = false;
        let mut out: BTreeMap<Resource, ActuatorCommand> = BTreeMap::new();
        for (task, pid) in &self.assignment.running {
            let provider = &self.providers[pid.0];
            for cmd in (provider.commander)(world, dt) {
                let held = self.assignment.holds.get(&cmd.resource) == Some(task);
                if !held || out.contains_key(&cmd.resource) {
                    tracing::warn!(task = %task, resource = %cmd.resource, "dropping command for unheld resource");
                    self.violations.push(Violation { provider: *pid, task: task.clone(), command: cmd });
                    continue;
                }
                out.insert(cmd.resource, cmd);
            }
        }
        Ok(out.into_values().collect())
    }
}
