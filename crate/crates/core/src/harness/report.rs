use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::llm::PromptTemplate;
use crate::simworld::SimConfig;

use super::goals::GoalSpec;
use super::session::Record;
use super::suite::{ResultsTable, SuiteRun};
use super::trial::{TrialConfig, TrialResult};
use super::HarnessError;

/// First line of every per-trial log: enough to rerun the trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub goal: GoalSpec,
    pub seed: u64,
    pub backend: String,
    pub sim: SimConfig,
    pub trial: TrialConfig,
    pub template: String,
}

/// Settings shared by every trial of a suite run.
#[derive(Debug, Clone)]
pub struct RunContext<'a> {
    pub sim: &'a SimConfig,
    pub trial: &'a TrialConfig,
    pub template: &'a PromptTemplate,
}

fn rate(v: f64) -> String {
    format!("{v:.2}")
}

pub fn render_table(table: &ResultsTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "backend: {}  base seed: {}", table.backend, table.base_seed);
    let _ = writeln!(out, "{:<4}  {:<28}  {:>7}  {:>13}  {:>7}", "Goal", "Request", "Success", "Executability", "Repeats");
    for r in &table.rows {
        let (success, exec) = if !r.valid() {
            ("invalid".to_string(), "invalid".to_string())
        } else {
            (r.success_rate.map_or_else(|| "-".to_string(), rate), rate(r.executability))
        };
        let _ = writeln!(out, "{:<4}  {:<28}  {:>7}  {:>13}  {:>7}", r.goal, format!("\"{}\"", r.request), success, exec, r.repeats);
    }
    out
}

pub fn log_file_name(trial: &TrialResult) -> String {
    format!("goal{}_seed{}.jsonl", trial.goal, trial.seed)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

fn json_line<T: Serialize>(out: &mut Vec<u8>, value: &T) {
    serde_json::to_writer(&mut *out, value).expect("report records serialize");
    out.push(b'\n');
}

pub fn write_trial_log(path: &Path, header: &LogHeader, records: &[Record]) -> Result<(), HarnessError> {
    let mut out = Vec::new();
    json_line(&mut out, header);
    for r in records {
        json_line(&mut out, r);
    }
    write_file(path, &out)
}

pub fn read_trial_log(path: &Path) -> Result<(LogHeader, Vec<Record>), HarnessError> {
    let file = fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let bad = |line: usize, message: String| HarnessError::Log { path: path.to_path_buf(), line, message };
    let mut lines = BufReader::new(file).lines();
    let first = lines.next().ok_or_else(|| bad(1, "empty log".into()))?.map_err(|e| HarnessError::io(path, e))?;
    let header: LogHeader = serde_json::from_str(&first).map_err(|e| bad(1, e.to_string()))?;
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| bad(i + 2, e.to_string()))?);
    }
    Ok((header, records))
}

/// Writes `results.txt`, `results.json`, `trials.jsonl` and one log per trial
/// under `logs/`. Returns the paths written, in order.
pub fn emit_report(run: &SuiteRun, ctx: &RunContext, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let logs = dir.join("logs");
    fs::create_dir_all(&logs).map_err(|e| HarnessError::io(&logs, e))?;
    let mut written = Vec::new();

    let text = dir.join("results.txt");
    write_file(&text, render_table(&run.table).as_bytes())?;
    written.push(text);

    let json = dir.join("results.json");
    let mut bytes = serde_json::to_vec_pretty(&run.table).expect("table serializes");
    bytes.push(b'\n');
    write_file(&json, &bytes)?;
    written.push(json);

    let jsonl = dir.join("trials.jsonl");
    let mut out = Vec::new();
    for t in &run.trials {
        json_line(&mut out, t);
    }
    write_file(&jsonl, &out)?;
    written.push(jsonl);

    for t in &run.trials {
        let header = LogHeader {
            goal: super::goals::goal_spec(t.goal)?,
            seed: t.seed,
            backend: t.backend.clone(),
            sim: ctx.sim.clone(),
            trial: ctx.trial.clone(),
            template: ctx.template.text().to_string(),
        };
        let path = logs.join(log_file_name(t));
        write_trial_log(&path, &header, &t.log)?;
        written.push(path);
    }
    Ok(written)
}
