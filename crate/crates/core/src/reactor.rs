//! Deterministic publish/subscribe bus with periodic and one-shot timers.
//!
//! A [`Reactor`] owns a piece of shared state `S` and a set of reactions. Each
//! reaction is bound to exactly one trigger: a topic, a periodic timer or a
//! one-shot deadline. Reactions run one at a time to completion; anything a
//! handler publishes is queued and delivered later, never nested.
//!
//! Everything due is kept in a single queue ordered by
//! `(time, class, registration/publication order)`. At one instant timers fire
//! first, in registration order, followed by message deliveries in publication
//! order. In simulated mode time only moves through [`Reactor::step`], which
//! makes a run a pure function of its registrations and inputs.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};
use thiserror::Error;

/// Slack used when comparing due times; absorbs `k * interval` rounding.
const TIME_EPSILON: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReactorError {
    #[error("topic name must not be empty")]
    EmptyTopic,
    #[error("reaction label `{0}` is already registered")]
    DuplicateReaction(String),
    #[error("periodic interval must be positive, got {0}")]
    NonPositiveInterval(f64),
    #[error("one-shot time {at} is before the current time {now}")]
    InThePast { at: f64, now: f64 },
    #[error("step() is only available in simulated-time mode")]
    NotSimulated,
    #[error("operation requires wall-clock mode")]
    NotWallClock,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Topic(String);

impl Topic {
    pub fn new(name: impl Into<String>) -> Result<Self, ReactorError> {
        let name = name.into();
        if name.is_empty() {
            return Err(ReactorError::EmptyTopic);
        }
        Ok(Topic(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Topic({})", self.0)
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReactionId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockMode {
    Simulated,
    WallClock,
}

/// Monotonic time source, in seconds since the reactor was created.
#[derive(Debug, Clone)]
pub struct Clock {
    mode: ClockMode,
    now: f64,
    origin: Instant,
}

impl Clock {
    pub fn simulated() -> Self {
        Clock { mode: ClockMode::Simulated, now: 0.0, origin: Instant::now() }
    }

    pub fn wall() -> Self {
        Clock { mode: ClockMode::WallClock, now: 0.0, origin: Instant::now() }
    }

    pub fn mode(&self) -> ClockMode {
        self.mode
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    fn advance_to(&mut self, t: f64) {
        if t > self.now {
            self.now = t;
        }
    }

    fn sync_wall(&mut self) {
        let t = self.origin.elapsed().as_secs_f64();
        self.advance_to(t);
    }
}

/// Handed to every handler; collects publications and control requests.
pub struct Ctx<M> {
    now: f64,
    outbox: Vec<(Topic, M)>,
    halt: bool,
}

impl<M> Ctx<M> {
    pub fn now(&self) -> f64 {
        self.now
    }

    /// Queue a publication. Delivery happens after the current handler returns.
    pub fn publish(&mut self, topic: &Topic, msg: M) {
        self.outbox.push((topic.clone(), msg));
    }

    /// Stop the current `step`/`run` call after this reaction.
    pub fn halt(&mut self) {
        self.halt = true;
    }
}

type MessageHandler<S, M> = Box<dyn FnMut(&mut S, &M, &mut Ctx<M>)>;
type TimerHandler<S, M> = Box<dyn FnMut(&mut S, &mut Ctx<M>)>;

enum Handler<S, M> {
    Message(MessageHandler<S, M>),
    Timer(TimerHandler<S, M>),
}

#[derive(Debug, Clone)]
enum Trigger {
    Topic(Topic),
    Periodic { interval: f64, origin: f64, fired: u64 },
    Once,
}

struct Reaction<S, M> {
    label: String,
    trigger: Trigger,
    handler: Handler<S, M>,
    live: bool,
}

enum DueKind<M> {
    Fire(usize),
    Deliver { reaction: usize, msg: Rc<M> },
}

struct Due<M> {
    time: f64,
    // 0 = timer, 1 = delivery
    class: u8,
    major: u64,
    minor: u64,
    kind: DueKind<M>,
}

impl<M> Due<M> {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.class.cmp(&other.class))
            .then(self.major.cmp(&other.major))
            .then(self.minor.cmp(&other.minor))
    }
}

impl<M> PartialEq for Due<M> {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}

impl<M> Eq for Due<M> {}

impl<M> PartialOrd for Due<M> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<M> Ord for Due<M> {
    // BinaryHeap is a max-heap; invert so the earliest key pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key_cmp(self)
    }
}

/// One executed reaction, for determinism checks.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub time: f64,
    pub label: String,
}

/// Thread-safe entry point for external inputs. Messages are published at the
/// reactor's current time the next time it drains the inbox, which happens
/// between reactions.
pub struct Inbox<M> {
    tx: mpsc::Sender<(Topic, M)>,
}

impl<M> Clone for Inbox<M> {
    fn clone(&self) -> Self {
        Inbox { tx: self.tx.clone() }
    }
}

impl<M> Inbox<M> {
    /// Returns `false` once the reactor has been dropped.
    pub fn send(&self, topic: &Topic, msg: M) -> bool {
        self.tx.send((topic.clone(), msg)).is_ok()
    }
}

pub struct Reactor<S, M> {
    clock: Clock,
    state: S,
    reactions: Vec<Reaction<S, M>>,
    subscribers: BTreeMap<Topic, Vec<usize>>,
    queue: BinaryHeap<Due<M>>,
    publication_seq: u64,
    inbox_tx: mpsc::Sender<(Topic, M)>,
    inbox_rx: mpsc::Receiver<(Topic, M)>,
    trace: Option<Vec<TraceEntry>>,
    halted: bool,
}

impl<S, M> Reactor<S, M> {
    pub fn new(clock: Clock, state: S) -> Self {
        let (inbox_tx, inbox_rx) = mpsc::channel();
        Reactor {
            clock,
            state,
            reactions: Vec::new(),
            subscribers: BTreeMap::new(),
            queue: BinaryHeap::new(),
            publication_seq: 0,
            inbox_tx,
            inbox_rx,
            trace: None,
            halted: false,
        }
    }

    pub fn simulated(state: S) -> Self {
        Self::new(Clock::simulated(), state)
    }

    pub fn now(&self) -> f64 {
        self.clock.now()
    }

    pub fn mode(&self) -> ClockMode {
        self.clock.mode()
    }

    pub fn state(&self) -> &S {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut S {
        &mut self.state
    }

    pub fn into_state(self) -> S {
        self.state
    }

    pub fn inbox(&self) -> Inbox<M> {
        Inbox { tx: self.inbox_tx.clone() }
    }

    /// Record every executed reaction from now on.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> &[TraceEntry] {
        self.trace.as_deref().unwrap_or(&[])
    }

    /// SHA-256 over the trace, hex encoded.
    pub fn trace_digest(&self) -> String {
        let mut hasher = Sha256::new();
        for entry in self.trace() {
            hasher.update(entry.time.to_bits().to_le_bytes());
            hasher.update(entry.label.as_bytes());
            hasher.update(b"\n");
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    pub fn clear_halt(&mut self) {
        self.halted = false;
    }

    fn register(&mut self, label: &str, trigger: Trigger, handler: Handler<S, M>) -> Result<ReactionId, ReactorError> {
        if self.reactions.iter().any(|r| r.live && r.label == label) {
            return Err(ReactorError::DuplicateReaction(label.to_string()));
        }
        let idx = self.reactions.len();
        self.reactions.push(Reaction { label: label.to_string(), trigger, handler, live: true });
        Ok(ReactionId(idx))
    }

    pub fn subscribe<F>(&mut self, topic: &Topic, label: &str, handler: F) -> Result<ReactionId, ReactorError>
    where
        F: FnMut(&mut S, &M, &mut Ctx<M>) + 'static,
    {
        let id = self.register(label, Trigger::Topic(topic.clone()), Handler::Message(Box::new(handler)))?;
        self.subscribers.entry(topic.clone()).or_default().push(id.0);
        Ok(id)
    }

    /// Fire `handler` every `interval` seconds, first at `now + interval`.
    pub fn schedule_periodic<F>(&mut self, interval: f64, label: &str, handler: F) -> Result<ReactionId, ReactorError>
    where
        F: FnMut(&mut S, &mut Ctx<M>) + 'static,
    {
        if !(interval > 0.0) || !interval.is_finite() {
            return Err(ReactorError::NonPositiveInterval(interval));
        }
        let origin = self.now();
        let id = self.register(
            label,
            Trigger::Periodic { interval, origin, fired: 0 },
            Handler::Timer(Box::new(handler)),
        )?;
        self.queue.push(Due {
            time: origin + interval,
            class: 0,
            major: id.0 as u64,
            minor: 0,
            kind: DueKind::Fire(id.0),
        });
        Ok(id)
    }

    /// Fire `handler` once at absolute time `at`.
    pub fn schedule_at<F>(&mut self, at: f64, label: &str, handler: F) -> Result<ReactionId, ReactorError>
    where
        F: FnMut(&mut S, &mut Ctx<M>) + 'static,
    {
        if at + TIME_EPSILON < self.now() {
            return Err(ReactorError::InThePast { at, now: self.now() });
        }
        let id = self.register(label, Trigger::Once, Handler::Timer(Box::new(handler)))?;
        self.queue.push(Due { time: at, class: 0, major: id.0 as u64, minor: 0, kind: DueKind::Fire(id.0) });
        Ok(id)
    }

    /// Deactivate a reaction. Pending firings and deliveries to it are dropped.
    pub fn cancel(&mut self, id: ReactionId) {
        if let Some(r) = self.reactions.get_mut(id.0) {
            r.live = false;
            if let Trigger::Topic(topic) = &r.trigger {
                if let Some(subs) = self.subscribers.get_mut(topic) {
                    subs.retain(|&i| i != id.0);
                }
            }
        }
    }

    /// Queue `msg` for every current subscriber of `topic` at the current time.
    /// Returns the number of deliveries queued.
    pub fn publish(&mut self, topic: &Topic, msg: M) -> usize {
        let now = self.now();
        self.enqueue_publication(now, topic, msg)
    }

    fn enqueue_publication(&mut self, time: f64, topic: &Topic, msg: M) -> usize {
        let Some(subs) = self.subscribers.get(topic) else {
            return 0;
        };
        if subs.is_empty() {
            return 0;
        }
        let seq = self.publication_seq;
        self.publication_seq += 1;
        let msg = Rc::new(msg);
        for (order, &reaction) in subs.iter().enumerate() {
            self.queue.push(Due {
                time,
                class: 1,
                major: seq,
                minor: order as u64,
                kind: DueKind::Deliver { reaction, msg: Rc::clone(&msg) },
            });
        }
        subs.len()
    }

    fn drain_inbox(&mut self) {
        while let Ok((topic, msg)) = self.inbox_rx.try_recv() {
            self.publish(&topic, msg);
        }
    }

    fn next_due_time(&self) -> Option<f64> {
        self.queue.peek().map(|d| d.time)
    }

    /// Pop and run one due entry. Returns whether a handler actually ran.
    fn execute_next(&mut self) -> bool {
        let Some(due) = self.queue.pop() else {
            return false;
        };
        self.clock.advance_to(due.time);
        let now = self.clock.now();
        let mut ctx = Ctx { now, outbox: Vec::new(), halt: false };

        let idx = match &due.kind {
            DueKind::Fire(i) | DueKind::Deliver { reaction: i, .. } => *i,
        };
        let reaction = &mut self.reactions[idx];
        if !reaction.live {
            return false;
        }
        match (&mut reaction.handler, &due.kind) {
            (Handler::Timer(h), DueKind::Fire(_)) => h(&mut self.state, &mut ctx),
            (Handler::Message(h), DueKind::Deliver { msg, .. }) => h(&mut self.state, msg, &mut ctx),
            _ => unreachable!("trigger kind and handler kind always agree"),
        }
        let label = reaction.label.clone();

        // Re-arm periodic timers from the origin so error never accumulates.
        match &mut reaction.trigger {
            Trigger::Periodic { interval, origin, fired } => {
                *fired += 1;
                let next = *origin + (*fired as f64 + 1.0) * *interval;
                self.queue.push(Due { time: next, class: 0, major: idx as u64, minor: 0, kind: DueKind::Fire(idx) });
            }
            Trigger::Once => reaction.live = false,
            Trigger::Topic(_) => {}
        }

        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceEntry { time: now, label });
        }
        for (topic, msg) in ctx.outbox {
            self.enqueue_publication(now, &topic, msg);
        }
        if ctx.halt {
            self.halted = true;
        }
        true
    }

    /// Run everything due at or before `until`, in order. Returns the number of
    /// reactions executed. Stops early if a handler calls [`Ctx::halt`].
    pub fn step(&mut self, until: f64) -> Result<usize, ReactorError> {
        if self.mode() != ClockMode::Simulated {
            return Err(ReactorError::NotSimulated);
        }
        let mut executed = 0;
        while !self.halted {
            self.drain_inbox();
            match self.next_due_time() {
                Some(t) if t <= until + TIME_EPSILON => {
                    if self.execute_next() {
                        executed += 1;
                    }
                }
                _ => break,
            }
        }
        if !self.halted {
            self.clock.advance_to(until);
        }
        Ok(executed)
    }

    /// Wall-clock mode: execute reactions as they come due until `stop` is set,
    /// a handler halts, or `limit` elapses. Returns the number executed.
    pub fn run(&mut self, stop: &AtomicBool, limit: Option<Duration>) -> Result<usize, ReactorError> {
        if self.mode() != ClockMode::WallClock {
            return Err(ReactorError::NotWallClock);
        }
        let started = self.clock.origin.elapsed().as_secs_f64();
        let deadline = limit.map(|d| started + d.as_secs_f64());
        let mut executed = 0;
        while !self.halted && !stop.load(AtomicOrdering::Relaxed) {
            self.clock.sync_wall();
            let now = self.clock.now();
            if deadline.is_some_and(|d| now >= d) {
                break;
            }
            self.drain_inbox();
            match self.next_due_time() {
                Some(t) if t <= now + TIME_EPSILON => {
                    if self.execute_next() {
                        executed += 1;
                    }
                }
                next => {
                    let mut wait = next.map_or(0.002, |t| t - now).min(0.002);
                    if let Some(d) = deadline {
                        wait = wait.min(d - now);
                    }
                    if wait > 0.0 {
                        std::thread::sleep(Duration::from_secs_f64(wait));
                    }
                }
            }
        }
        Ok(executed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn topic(name: &str) -> Topic {
        Topic::new(name).unwrap()
    }

    #[test]
    fn fifo_delivery_on_one_topic() {
        let mut r: Reactor<Vec<u32>, u32> = Reactor::simulated(Vec::new());
        let t = topic("ball.observation");
        r.subscribe(&t, "h", |s, m, _| s.push(*m)).unwrap();
        for i in 0..3 {
            assert_eq!(r.publish(&t, i), 1);
        }
        assert_eq!(r.step(0.0).unwrap(), 3);
        assert_eq!(r.state(), &vec![0, 1, 2]);
    }

    #[test]
    fn topic_without_publishers_never_fires() {
        let mut r: Reactor<u32, ()> = Reactor::simulated(0);
        r.subscribe(&topic("quiet"), "h", |s, _, _| *s += 1).unwrap();
        r.step(10.0).unwrap();
        assert_eq!(*r.state(), 0);
    }

    #[test]
    fn two_handlers_run_in_registration_order() {
        let mut r: Reactor<Vec<(char, u32)>, u32> = Reactor::simulated(Vec::new());
        let t = topic("x");
        r.subscribe(&t, "a", |s, m, _| s.push(('a', *m))).unwrap();
        r.subscribe(&t, "b", |s, m, _| s.push(('b', *m))).unwrap();
        assert_eq!(r.publish(&t, 1), 2);
        assert_eq!(r.publish(&t, 2), 2);
        r.step(0.0).unwrap();
        assert_eq!(r.state(), &vec![('a', 1), ('b', 1), ('a', 2), ('b', 2)]);
    }

    #[test]
    fn publish_without_subscribers_returns_zero() {
        let mut r: Reactor<(), String> = Reactor::simulated(());
        assert_eq!(r.publish(&topic("goal.text"), "Find the ball".into()), 0);
        r.subscribe(&topic("goal.text"), "g", |_, _, _| {}).unwrap();
        assert_eq!(r.publish(&topic("goal.text"), "Find the ball".into()), 1);
    }

    #[test]
    fn duplicate_label_and_bad_interval_are_rejected() {
        let mut r: Reactor<(), ()> = Reactor::simulated(());
        r.subscribe(&topic("a"), "h", |_, _, _| {}).unwrap();
        assert_eq!(
            r.subscribe(&topic("b"), "h", |_, _, _| {}).unwrap_err(),
            ReactorError::DuplicateReaction("h".into())
        );
        assert!(matches!(
            r.schedule_periodic(0.0, "p", |_, _| {}),
            Err(ReactorError::NonPositiveInterval(_))
        ));
        assert!(r.schedule_periodic(-1.0, "p", |_, _| {}).is_err());
        assert_eq!(Topic::new("").unwrap_err(), ReactorError::EmptyTopic);
    }

    #[test]
    fn periodic_firing_counts() {
        let mut r: Reactor<(u32, u32), ()> = Reactor::simulated((0, 0));
        r.schedule_periodic(2.0, "poll", |s, _| s.0 += 1).unwrap();
        r.schedule_periodic(1.0 / 90.0, "tick", |s, _| s.1 += 1).unwrap();
        r.step(1.0).unwrap();
        assert_eq!(r.state().1, 90);
        r.step(10.0).unwrap();
        assert_eq!(r.state().0, 5);
        assert_eq!(r.state().1, 900);
    }

    #[test]
    fn empty_step_executes_nothing() {
        let mut r: Reactor<(), ()> = Reactor::simulated(());
        assert_eq!(r.step(0.0).unwrap(), 0);
    }

    #[test]
    fn simultaneous_timers_fire_in_registration_order() {
        let mut r: Reactor<Vec<&'static str>, ()> = Reactor::simulated(Vec::new());
        // Different periods so re-arm order differs from registration order.
        r.schedule_periodic(0.5, "first", |s, _| s.push("first")).unwrap();
        r.schedule_periodic(0.25, "second", |s, _| s.push("second")).unwrap();
        r.step(1.0).unwrap();
        assert_eq!(r.state(), &vec!["second", "first", "second", "second", "first", "second"]);
    }

    #[test]
    fn handler_publications_are_queued_not_nested() {
        let mut r: Reactor<Vec<String>, u32> = Reactor::simulated(Vec::new());
        let a = topic("a");
        let b = topic("b");
        let b2 = b.clone();
        r.subscribe(&a, "on_a", move |s, m, ctx| {
            s.push(format!("a{m}:start"));
            ctx.publish(&b2, *m);
            s.push(format!("a{m}:end"));
        })
        .unwrap();
        r.subscribe(&b, "on_b", |s, m, _| s.push(format!("b{m}"))).unwrap();
        r.publish(&a, 1);
        r.publish(&a, 2);
        r.step(0.0).unwrap();
        assert_eq!(r.state(), &vec!["a1:start", "a1:end", "a2:start", "a2:end", "b1", "b2"]);
    }

    #[test]
    fn step_rejected_in_wall_clock_mode() {
        let mut r: Reactor<(), ()> = Reactor::new(Clock::wall(), ());
        assert_eq!(r.step(1.0).unwrap_err(), ReactorError::NotSimulated);
        let mut s: Reactor<(), ()> = Reactor::simulated(());
        assert_eq!(s.run(&AtomicBool::new(false), None).unwrap_err(), ReactorError::NotWallClock);
    }

    #[test]
    fn halt_stops_step_at_the_halting_reaction() {
        let mut r: Reactor<u32, ()> = Reactor::simulated(0);
        r.schedule_periodic(1.0, "count", |s, ctx| {
            *s += 1;
            if *s == 3 {
                ctx.halt();
            }
        })
        .unwrap();
        r.step(10.0).unwrap();
        assert_eq!(*r.state(), 3);
        assert!((r.now() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn one_shot_fires_once_and_cancel_drops_pending() {
        let mut r: Reactor<Vec<&'static str>, ()> = Reactor::simulated(Vec::new());
        r.schedule_at(1.5, "once", |s, _| s.push("once")).unwrap();
        let p = r.schedule_periodic(1.0, "p", |s, _| s.push("p")).unwrap();
        r.step(2.0).unwrap();
        r.cancel(p);
        r.step(5.0).unwrap();
        assert_eq!(r.state(), &vec!["p", "once", "p"]);
        assert!(r.schedule_at(1.0, "late", |_, _| {}).is_err());
    }

    #[test]
    fn inbox_is_drained_between_reactions() {
        let mut r: Reactor<Vec<u32>, u32> = Reactor::simulated(Vec::new());
        let t = topic("cmd");
        r.subscribe(&t, "h", |s, m, _| s.push(*m)).unwrap();
        let inbox = r.inbox();
        let t2 = t.clone();
        std::thread::spawn(move || {
            inbox.send(&t2, 7);
            inbox.send(&t2, 8);
        })
        .join()
        .unwrap();
        r.step(0.1).unwrap();
        assert_eq!(r.state(), &vec![7, 8]);
    }

    // Random interleaving of publications on two topics; each message carries a
    // per-topic sequence number, so delivery order must be strictly increasing.
    #[test]
    fn per_topic_order_survives_random_interleaving() {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut r: Reactor<BTreeMap<String, Vec<u32>>, u32> = Reactor::simulated(BTreeMap::new());
            let topics = [topic("left"), topic("right")];
            for t in &topics {
                let name = t.as_str().to_string();
                r.subscribe(t, &format!("sub.{name}"), move |s, m, _| s.entry(name.clone()).or_default().push(*m))
                    .unwrap();
            }
            let mut next = [0u32; 2];
            let mut time = 0.0;
            for _ in 0..200 {
                let which = rng.random_range(0..2);
                r.publish(&topics[which], next[which]);
                next[which] += 1;
                if rng.random_bool(0.3) {
                    time += rng.random_range(0.0..0.5);
                    r.step(time).unwrap();
                }
            }
            r.step(time + 1.0).unwrap();
            for (i, t) in topics.iter().enumerate() {
                let got = &r.state()[t.as_str()];
                assert_eq!(got.len() as u32, next[i]);
                assert!(got.windows(2).all(|w| w[0] + 1 == w[1]));
            }
        }
    }

    fn scripted_run(seed: u64) -> (String, Vec<TraceEntry>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut r: Reactor<u64, u64> = Reactor::simulated(0);
        r.enable_trace();
        let t = topic("echo");
        let t2 = t.clone();
        r.subscribe(&t, "echo", |s, m, _| *s = s.wrapping_mul(31).wrapping_add(*m)).unwrap();
        r.schedule_periodic(0.3, "fast", move |s, ctx| ctx.publish(&t2, *s % 7)).unwrap();
        r.schedule_periodic(0.7, "slow", |s, _| *s += 1).unwrap();
        for _ in 0..50 {
            let v: u64 = rng.random_range(0..100);
            r.publish(&t, v);
            let dt = rng.random_range(0.0..0.4);
            let until = r.now() + dt;
            r.step(until).unwrap();
        }
        (r.trace_digest(), r.trace().to_vec())
    }

    #[test]
    fn identical_schedules_give_identical_traces() {
        let (d1, t1) = scripted_run(42);
        let (d2, t2) = scripted_run(42);
        assert_eq!(t1, t2);
        assert_eq!(d1, d2);
        let (d3, _) = scripted_run(43);
        assert_ne!(d1, d3);
    }

    #[test]
    fn wall_clock_run_fires_timers() {
        let mut r: Reactor<u32, ()> = Reactor::new(Clock::wall(), 0);
        r.schedule_periodic(0.01, "tick", |s, _| *s += 1).unwrap();
        r.run(&AtomicBool::new(false), Some(Duration::from_millis(105))).unwrap();
        assert!((9..=11).contains(r.state()), "fired {}", r.state());
    }
}
