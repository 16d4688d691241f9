//! The live session: a wall-clock reactor on its own thread stepping the
//! world, polling the language model off-thread, and publishing snapshots.

use std::collections::{BTreeMap, VecDeque};
use std::sync::atomic::AtomicBool;
use std::sync::{mpsc, Arc, Mutex};
use std::thread;

use director_core::harness::{Session, TrialConfig};
use director_core::llm::{Backend, BackendError, PendingPoll, PromptTemplate};
use director_core::reactor::{Clock, Inbox, Reactor, Topic};
use director_core::simworld::{Scenario, SimConfig};
use tokio::sync::{broadcast, mpsc::UnboundedSender};

use crate::protocol::{AckStatus, Command, Metrics, ServerFrame, ServerMessage, Snapshot};
use crate::GatewayError;

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub sim: Arc<SimConfig>,
    pub trial: TrialConfig,
    pub template: PromptTemplate,
    pub scenario: Scenario,
    pub seed: u64,
    pub goal: String,
    pub snapshot_hz: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            sim: Arc::new(SimConfig::default()),
            trial: TrialConfig::default(),
            template: PromptTemplate::default(),
            scenario: Scenario::Standard,
            seed: 1,
            goal: "Find the ball".into(),
            snapshot_hz: 10.0,
        }
    }
}

/// Reply path back to the connection that sent a command.
pub type Reply = UnboundedSender<String>;

pub enum Msg {
    Command { command: Command, id: Option<u64>, reply: Reply },
    Answer { pending: PendingPoll, answer: Result<String, BackendError> },
}

/// Latest snapshot plus a broadcast of every later one. Subscribing and
/// publishing share a lock so a new client sees each frame exactly once.
pub struct Publisher {
    latest: Mutex<Option<Arc<str>>>,
    tx: broadcast::Sender<Arc<str>>,
}

impl Publisher {
    pub fn new() -> Self {
        Publisher { latest: Mutex::new(None), tx: broadcast::channel(256).0 }
    }

    pub fn publish(&self, frame: Arc<str>) {
        let mut latest = self.latest.lock().expect("publisher lock");
        *latest = Some(frame.clone());
        let _ = self.tx.send(frame);
    }

    pub fn subscribe(&self) -> (Option<Arc<str>>, broadcast::Receiver<Arc<str>>) {
        let latest = self.latest.lock().expect("publisher lock");
        (latest.clone(), self.tx.subscribe())
    }
}

impl Default for Publisher {
    fn default() -> Self {
        Self::new()
    }
}

pub fn commands_topic() -> Topic {
    Topic::new("gateway.commands").expect("non-empty")
}

fn answers_topic() -> Topic {
    Topic::new("llm.answers").expect("non-empty")
}

struct Live {
    session: Session,
    config: EngineConfig,
    backend: Arc<dyn Backend>,
    /// Set right after the reactor is built.
    inbox: Option<Inbox<Msg>>,
    publisher: Arc<Publisher>,
    paused: bool,
    queued: VecDeque<(Command, Option<u64>, Reply)>,
    seq: u64,
    polls: u64,
    executable: u64,
}

fn send(reply: &Reply, msg: ServerMessage) {
    let _ = reply.send(ServerFrame::new(msg).to_json());
}

impl Live {
    fn snapshot(&mut self) -> Snapshot {
        self.seq += 1;
        let s = &self.session;
        let w = s.world();
        let mut assignment: BTreeMap<_, Vec<_>> = BTreeMap::new();
        for (r, t) in &s.assignment().holds {
            assignment.entry(t.clone()).or_default().push(*r);
        }
        Snapshot {
            seq: self.seq,
            tick: w.tick,
            clock: s.now(),
            paused: self.paused,
            robot: w.robot,
            ball: w.ball,
            fallen: w.fallen,
            observation: s.frame().observe(),
            goal: s.goal().text().to_string(),
            assignment,
            last_decision: s.last_decision().cloned(),
            metrics: Metrics {
                polls: self.polls,
                executable_polls: self.executable,
                skipped_polls: s.llm().skipped(),
                kicks: w.kicks,
            },
        }
    }

    fn publish_snapshot(&mut self) {
        let snap = self.snapshot();
        let frame: Arc<str> = ServerFrame::new(ServerMessage::Snapshot(snap)).to_json().into();
        self.publisher.publish(frame);
    }

    fn apply(&mut self, command: Command, id: Option<u64>, reply: &Reply) {
        match &command {
            Command::SetGoal { text } => {
                if let Err(e) = self.session.set_goal(text) {
                    send(reply, ServerMessage::Reject { id, reason: e.to_string() });
                    return;
                }
            }
            Command::PushOver => self.session.push_over(),
            Command::Pause => self.paused = true,
            Command::Resume => self.paused = false,
            Command::Reset { scenario, seed } => {
                let scenario = scenario.unwrap_or(self.config.scenario);
                let seed = seed.unwrap_or(self.config.seed);
                self.session.reset(scenario, seed);
            }
        }
        tracing::info!(command = command.kind(), "command applied");
        send(reply, ServerMessage::Ack { id, command: command.kind().into(), status: AckStatus::Applied });
    }

    fn on_command(&mut self, command: &Command, id: Option<u64>, reply: &Reply) {
        if self.paused && *command != Command::Resume {
            self.queued.push_back((command.clone(), id, reply.clone()));
            send(reply, ServerMessage::Ack { id, command: command.kind().into(), status: AckStatus::Queued });
            return;
        }
        self.apply(command.clone(), id, reply);
        if *command == Command::Resume {
            while !self.paused {
                let Some((c, id, r)) = self.queued.pop_front() else { break };
                self.apply(c, id, &r);
            }
        }
    }

    fn start_poll(&mut self) {
        let Some(pending) = self.session.begin_poll() else {
            tracing::info!("poll skipped: previous query still in flight");
            return;
        };
        let backend = self.backend.clone();
        let inbox = self.inbox.clone().expect("inbox is set before the reactor runs");
        thread::spawn(move || {
            let answer = backend.complete(&pending.query);
            inbox.send(&answers_topic(), Msg::Answer { pending, answer });
        });
    }

    fn on_answer(&mut self, pending: &PendingPoll, answer: &Result<String, BackendError>) {
        self.polls += 1;
        if self.session.finish_poll(pending.clone(), answer.clone()).executable {
            self.executable += 1;
        }
        // The session log is for trials; a live run only needs the latest state.
        self.session.take_log();
    }
}

pub struct EngineHandle {
    pub inbox: Inbox<Msg>,
    pub publisher: Arc<Publisher>,
    pub thread: thread::JoinHandle<()>,
}

/// Start the engine thread. Returns once the first snapshot is published.
pub fn spawn(config: EngineConfig, backend: Arc<dyn Backend>, stop: Arc<AtomicBool>) -> Result<EngineHandle, GatewayError> {
    let publisher = Arc::new(Publisher::new());
    let (ready_tx, ready_rx) = mpsc::channel();
    let shared = publisher.clone();
    let thread = thread::Builder::new()
        .name("director-engine".into())
        .spawn(move || {
            let built = build(config, backend, shared);
            let mut reactor = match built {
                Ok(r) => r,
                Err(e) => {
                    let _ = ready_tx.send(Err(e));
                    return;
                }
            };
            let _ = ready_tx.send(Ok(reactor.inbox()));
            if let Err(e) = reactor.run(&stop, None) {
                tracing::error!(error = %e, "engine stopped");
            }
        })
        .map_err(|e| GatewayError::Engine(e.to_string()))?;
    let inbox = ready_rx.recv().map_err(|_| GatewayError::Engine("engine thread exited during startup".into()))??;
    Ok(EngineHandle { inbox, publisher, thread })
}

fn build(config: EngineConfig, backend: Arc<dyn Backend>, publisher: Arc<Publisher>) -> Result<Reactor<Live, Msg>, GatewayError> {
    let dt = config.sim.physics.dt();
    let poll_period = config.trial.poll_period;
    let snapshot_period = 1.0 / config.snapshot_hz;
    if !(poll_period > 0.0) || !(snapshot_period > 0.0) || !snapshot_period.is_finite() {
        return Err(GatewayError::Engine("poll period and snapshot rate must be positive".into()));
    }
    let session = Session::new(config.sim.clone(), config.scenario, config.seed, config.template.clone(), &config.goal)?;
    let mut reactor: Reactor<Live, Msg> = Reactor::new(
        Clock::wall(),
        Live {
            session,
            config,
            backend,
            inbox: None,
            publisher,
            paused: false,
            queued: VecDeque::new(),
            seq: 0,
            polls: 0,
            executable: 0,
        },
    );
    reactor.state_mut().inbox = Some(reactor.inbox());
    reactor.state_mut().publish_snapshot();

    reactor.subscribe(&commands_topic(), "commands", |s: &mut Live, m: &Msg, _| {
        if let Msg::Command { command, id, reply } = m {
            s.on_command(command, *id, reply);
        }
    })?;
    reactor.subscribe(&answers_topic(), "answers", |s: &mut Live, m: &Msg, _| {
        if let Msg::Answer { pending, answer } = m {
            s.on_answer(pending, answer);
        }
    })?;
    reactor.schedule_periodic(dt, "physics", |s: &mut Live, _| {
        if s.paused {
            return;
        }
        if let Err(e) = s.session.tick() {
            tracing::error!(error = %e, "physics tick failed");
        }
        s.session.take_log();
    })?;
    reactor.schedule_periodic(poll_period, "llm", |s: &mut Live, _| {
        if !s.paused {
            s.start_poll();
        }
    })?;
    reactor.schedule_periodic(snapshot_period, "snapshot", |s: &mut Live, _| s.publish_snapshot())?;
    Ok(reactor)
}
