use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::llm::{Backend, PromptTemplate};
use crate::simworld::SimConfig;

use super::goals::goal_spec;
use super::trial::{run_trial, Termination, TrialConfig, TrialResult};
use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalRow {
    pub goal: u8,
    pub request: String,
    pub repeats: u32,
    /// `None` for infeasible goals.
    pub success_rate: Option<f64>,
    pub executability: f64,
    pub aborted: u32,
}

impl GoalRow {
    /// A row with an aborted trial is reported but not averaged.
    pub fn valid(&self) -> bool {
        self.aborted == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub backend: String,
    pub base_seed: u64,
    pub rows: Vec<GoalRow>,
}

impl ResultsTable {
    pub fn row(&self, goal: u8) -> Option<&GoalRow> {
        self.rows.iter().find(|r| r.goal == goal)
    }
}

#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub table: ResultsTable,
    pub trials: Vec<TrialResult>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0u32), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn aggregate(goal: u8, trials: &[TrialResult]) -> Result<GoalRow, HarnessError> {
    let spec = goal_spec(goal)?;
    let aborted = trials.iter().filter(|t| t.termination == Termination::Aborted).count() as u32;
    let success_rate = spec.feasible.then(|| mean(trials.iter().map(|t| if t.success == Some(true) { 1.0 } else { 0.0 })));
    Ok(GoalRow {
        goal,
        request: spec.request,
        repeats: trials.len() as u32,
        success_rate,
        executability: mean(trials.iter().map(TrialResult::executability)),
        aborted,
    })
}

/// `repeats` trials per goal with seeds `base_seed..base_seed + repeats`.
pub fn run_suite(
    goals: &[u8],
    repeats: u32,
    backend: &dyn Backend,
    base_seed: u64,
    sim: Arc<SimConfig>,
    cfg: &TrialConfig,
    template: &PromptTemplate,
) -> Result<SuiteRun, HarnessError> {
    if repeats == 0 {
        return Err(HarnessError::NoRepeats);
    }
    let mut rows = Vec::new();
    let mut all = Vec::new();
    for &goal in goals {
        let spec = goal_spec(goal)?;
        let mut trials = Vec::new();
        for i in 0..repeats as u64 {
            let seed = base_seed + i;
            let r = run_trial(&spec, backend, seed, sim.clone(), cfg, template.clone())?;
            tracing::info!(goal, seed, termination = ?r.termination, polls = r.polls, "trial done");
            trials.push(r);
        }
        rows.push(aggregate(goal, &trials)?);
        all.extend(trials);
    }
    Ok(SuiteRun { table: ResultsTable { backend: backend.name().to_string(), base_seed, rows }, trials: all })
}
