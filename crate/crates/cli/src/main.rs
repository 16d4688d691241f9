use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};
use director_core::harness::report::{emit_report, render_table, RunContext};
use director_core::harness::{make_backend, parse_goal_list, replay::replay_log, run_suite, BackendKind, RunConfig};
use director_core::simworld::Scenario;
use director_gateway::EngineConfig;

#[derive(Parser)]
#[command(name = "director", about = "Run goal suites, replay trial logs, or serve the live gateway")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run goals against a backend and print the results table.
    Run {
        #[arg(long, default_value = "1-9")]
        goals: String,
        #[arg(long, default_value_t = 10)]
        repeats: u32,
        #[arg(long, default_value = "scripted")]
        backend: BackendKind,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write results and per-trial logs into this directory.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Serve the live gateway on HOST:PORT instead of running the suite.
        #[arg(long, value_name = "HOST:PORT")]
        serve: Option<String>,
    },
    /// Rerun a trial log against its recorded answers.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run { goals, repeats, backend, seed, config, report, serve } => {
            let cfg = match &config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::default(),
            };
            let template = cfg.template()?;
            // Built before any runtime exists; the blocking HTTP client must
            // not be created inside one.
            let backend = make_backend(backend, &cfg.backend)?;
            let sim = Arc::new(cfg.sim.clone());

            if let Some(addr) = serve {
                let engine = EngineConfig { sim, trial: cfg.trial.clone(), template, scenario: Scenario::Standard, seed, ..EngineConfig::default() };
                serve_until_interrupted(&addr, engine, Arc::from(backend))?;
                return Ok(true);
            }

            let goals = parse_goal_list(&goals)?;
            let run = run_suite(&goals, repeats, backend.as_ref(), seed, sim, &cfg.trial, &template)?;
            print!("{}", render_table(&run.table));
            if let Some(dir) = report {
                let ctx = RunContext { sim: &cfg.sim, trial: &cfg.trial, template: &template };
                let files = emit_report(&run, &ctx, &dir)?;
                eprintln!("wrote {} files to {}", files.len(), dir.display());
            }
            Ok(run.table.rows.iter().all(|r| r.aborted == 0))
        }
        Command::Replay { log } => {
            let out = replay_log(&log).with_context(|| format!("replaying {}", log.display()))?;
            let r = &out.result;
            println!(
                "goal {} seed {}: {:?}, {} polls, {:.2}s, {} records",
                r.goal, r.seed, r.termination, r.polls, r.duration, out.recorded
            );
            match out.diverged_at {
                None => println!("replay matches the log"),
                Some(i) => println!("replay diverges at record {i}"),
            }
            Ok(out.matches())
        }
    }
}

fn serve_until_interrupted(addr: &str, engine: EngineConfig, backend: Arc<dyn director_core::llm::Backend>) -> anyhow::Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let gateway = director_gateway::serve(addr, engine, backend).await?;
        eprintln!("serving on ws://{}/ws", gateway.local_addr());
        tokio::signal::ctrl_c().await?;
        gateway.shutdown().await;
        anyhow::Ok(())
    })
}
