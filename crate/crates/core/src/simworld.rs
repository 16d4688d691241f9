//! Kinematic 2D soccer world with a synthetic ball observer.
//!
//! Coordinates are metres with the origin at the centre spot. The robot starts
//! facing its own goal at `-x`; the opponent goal is at `+x`. Motion is purely
//! kinematic and the ball only moves when kicked.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actuation::{Action, ActuatorCommand, Point, Resource};
use crate::director::{ConditionId, WorldModel};

const EPS: f64 = 1e-9;

pub mod conditions {
    pub const UPRIGHT: &str = "upright";
    pub const FALLEN: &str = "fallen";
    pub const STABLE_STANCE: &str = "stable_stance";
    pub const BALL_VISIBLE: &str = "ball_visible";
    pub const BALL_IN_REACH: &str = "ball_in_reach";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSpec {
    pub length: f64,
    pub width: f64,
    pub goal_width: f64,
    pub centre_circle_radius: f64,
    /// Slack around the touch and end lines within which bodies are kept.
    pub margin: f64,
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec { length: 9.0, width: 6.0, goal_width: 2.6, centre_circle_radius: 0.75, margin: 0.5 }
    }
}

impl FieldSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let dims = [self.length, self.width, self.goal_width, self.centre_circle_radius];
        if dims.iter().any(|d| !(*d > 0.0)) || self.margin < 0.0 || self.goal_width > self.width {
            return Err(SimError::BadField);
        }
        Ok(())
    }

    pub fn clamp(&self, p: Point) -> Point {
        let hx = self.length / 2.0 + self.margin;
        let hy = self.width / 2.0 + self.margin;
        Point::new(p.x.clamp(-hx, hx), p.y.clamp(-hy, hy))
    }

    /// Ball centre past the `+x` end line between the posts.
    pub fn in_opponent_goal(&self, ball: Point) -> bool {
        ball.x >= self.length / 2.0 && ball.y.abs() <= self.goal_width / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub tick_hz: f64,
    pub walk_speed: f64,
    pub heading_slew: f64,
    pub turn_rate: f64,
    pub head_limit_deg: f64,
    pub pan_hz: f64,
    pub wave_hz: f64,
    pub kick_reach: f64,
    pub kick_half_angle_deg: f64,
    pub kick_distance: f64,
    pub getup_duration: f64,
    pub stance_settle: f64,
    pub view_range: f64,
    pub fov_half_angle_deg: f64,
    pub distance_noise_sigma: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            tick_hz: 90.0,
            walk_speed: 0.15,
            heading_slew: 1.0,
            turn_rate: 0.5,
            head_limit_deg: 60.0,
            pan_hz: 0.25,
            wave_hz: 1.0,
            kick_reach: 0.25,
            kick_half_angle_deg: 30.0,
            kick_distance: 1.5,
            getup_duration: 3.0,
            stance_settle: 0.3,
            view_range: 6.0,
            fov_half_angle_deg: 45.0,
            distance_noise_sigma: 0.0,
        }
    }
}

impl PhysicsConfig {
    pub fn dt(&self) -> f64 {
        1.0 / self.tick_hz
    }

    pub fn head_limit(&self) -> f64 {
        self.head_limit_deg.to_radians()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub field: FieldSpec,
    pub physics: PhysicsConfig,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("more than one command for {0} in a single tick")]
    DuplicateCommand(Resource),
    #[error("field dimensions must be positive and the goal must fit the end line")]
    BadField,
}

/// Starting layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Robot on the centre spot facing its own goal, ball behind it on the
    /// centre circle.
    Standard,
    /// Same positions, robot turned around to face the ball.
    FacingBall,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotPose {
    pub position: Point,
    pub heading: f64,
    pub head_yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sighting {
    pub at: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub robot: RobotPose,
    pub ball: Point,
    pub fallen: bool,
    pub getup_remaining: f64,
    pub stable_stance: bool,
    /// Seconds since the last locomotion command.
    pub settled_for: f64,
    pub clock: f64,
    pub tick: u64,
    pub rng_seed: u64,
    pub scan_phase: f64,
    pub last_sighting: Option<Sighting>,
    pub kicks: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallObservation {
    pub visible: bool,
    /// Seconds since the last sighting; `None` if never seen.
    pub last_seen: Option<f64>,
    /// Distance at the last sighting; `None` if never seen.
    pub distance: Option<f64>,
}

impl BallObservation {
    pub const NEVER_SEEN: BallObservation = BallObservation { visible: false, last_seen: None, distance: None };
}

pub fn wrap_angle(a: f64) -> f64 {
    let mut a = (a + PI).rem_euclid(TAU) - PI;
    if a <= -PI {
        a += TAU;
    }
    a
}

impl WorldState {
    pub fn gaze(&self) -> f64 {
        wrap_angle(self.robot.heading + self.robot.head_yaw)
    }

    pub fn ball_distance(&self) -> f64 {
        self.robot.position.distance(self.ball)
    }

    /// Ball bearing relative to the body heading.
    pub fn ball_bearing(&self) -> f64 {
        wrap_angle(self.robot.position.bearing_to(self.ball) - self.robot.heading)
    }
}

pub fn reset(scenario: Scenario, seed: u64, config: &SimConfig) -> WorldState {
    let heading = match scenario {
        Scenario::Standard => PI,
        Scenario::FacingBall => 0.0,
    };
    let mut world = WorldState {
        robot: RobotPose { position: Point::new(0.0, 0.0), heading, head_yaw: 0.0 },
        ball: Point::new(config.field.centre_circle_radius, 0.0),
        fallen: false,
        getup_remaining: 0.0,
        stable_stance: true,
        settled_for: config.physics.stance_settle,
        clock: 0.0,
        tick: 0,
        rng_seed: seed,
        scan_phase: 0.0,
        last_sighting: None,
        kicks: 0,
    };
    remember_sighting(&mut world, config);
    world
}

/// Geometric visibility, independent of sensor noise.
pub fn ball_in_view(world: &WorldState, config: &SimConfig) -> bool {
    if world.fallen {
        return false;
    }
    let dist = world.ball_distance();
    if dist > config.physics.view_range {
        return false;
    }
    if dist < EPS {
        return true;
    }
    let off_gaze = wrap_angle(world.robot.position.bearing_to(world.ball) - world.gaze());
    off_gaze.abs() <= config.physics.fov_half_angle_deg.to_radians() + EPS
}

pub fn ball_in_reach(world: &WorldState, config: &SimConfig) -> bool {
    let p = &config.physics;
    world.ball_distance() <= p.kick_reach + EPS && world.ball_bearing().abs() <= p.kick_half_angle_deg.to_radians() + EPS
}

fn noisy_distance(world: &WorldState, sigma: f64) -> f64 {
    let truth = world.ball_distance();
    if sigma <= 0.0 {
        return truth;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(world.rng_seed);
    rng.set_stream(world.tick);
    let n = Normal::new(0.0, sigma).expect("sigma is positive and finite");
    (truth * (1.0 + n.sample(&mut rng))).max(0.0)
}

pub fn observe_ball(world: &WorldState, config: &SimConfig) -> BallObservation {
    if ball_in_view(world, config) {
        return BallObservation {
            visible: true,
            last_seen: Some(0.0),
            distance: Some(noisy_distance(world, config.physics.distance_noise_sigma)),
        };
    }
    match world.last_sighting {
        Some(s) => BallObservation { visible: false, last_seen: Some((world.clock - s.at).max(0.0)), distance: Some(s.distance) },
        None => BallObservation::NEVER_SEEN,
    }
}

fn remember_sighting(world: &mut WorldState, config: &SimConfig) {
    let obs = observe_ball(world, config);
    if obs.visible {
        world.last_sighting = Some(Sighting { at: world.clock, distance: obs.distance.unwrap_or_default() });
    }
}

/// Knock the robot over. No-op if it is already down.
pub fn inject_fall(world: &WorldState, config: &SimConfig) -> WorldState {
    let mut w = world.clone();
    if !w.fallen {
        w.fallen = true;
        w.getup_remaining = config.physics.getup_duration;
        w.stable_stance = false;
        w.settled_for = 0.0;
    }
    w
}

/// Advance the world by `dt` under `commands`. Pure: the result depends only
/// on the arguments.
pub fn step(world: &WorldState, commands: &[ActuatorCommand], dt: f64, config: &SimConfig) -> Result<WorldState, SimError> {
    let mut legs = None;
    let mut arms = None;
    let mut head = None;
    for c in commands {
        let slot = match c.resource {
            Resource::Legs => &mut legs,
            Resource::Arms => &mut arms,
            Resource::Head => &mut head,
        };
        if slot.replace(c.action).is_some() {
            return Err(SimError::DuplicateCommand(c.resource));
        }
    }
    let p = &config.physics;
    let mut w = world.clone();

    if w.fallen {
        if commands.iter().any(|c| c.action == Action::GetupTrajectory) {
            w.getup_remaining -= dt;
            if w.getup_remaining <= EPS {
                w.getup_remaining = 0.0;
                w.fallen = false;
            }
        }
        w.stable_stance = false;
        w.settled_for = 0.0;
    } else {
        match legs {
            Some(Action::WalkToward { target }) => walk_toward(&mut w, target, dt, p),
            Some(Action::Turn { rate }) => {
                let rate = rate.clamp(-p.turn_rate, p.turn_rate);
                w.robot.heading = wrap_angle(w.robot.heading + rate * dt);
            }
            Some(Action::Kick) => {
                if ball_in_reach(&w, config) {
                    let h = w.robot.heading;
                    w.ball = Point::new(w.ball.x + p.kick_distance * h.cos(), w.ball.y + p.kick_distance * h.sin());
                    w.kicks += 1;
                }
            }
            _ => {}
        }
        let limit = p.head_limit();
        match head {
            Some(Action::PanScan) => {
                w.scan_phase = (w.scan_phase + TAU * p.pan_hz * dt).rem_euclid(TAU);
                w.robot.head_yaw = limit * w.scan_phase.sin();
            }
            Some(Action::Fixate { target }) => {
                let rel = wrap_angle(w.robot.position.bearing_to(target) - w.robot.heading);
                w.robot.head_yaw = rel.clamp(-limit, limit);
            }
            _ => {}
        }
        // Arms have no effect on the kinematic world.
        let _ = arms;

        if legs.is_some_and(|a| a.is_locomotion()) {
            w.settled_for = 0.0;
            w.stable_stance = false;
        } else {
            w.settled_for += dt;
            w.stable_stance = w.settled_for >= p.stance_settle - EPS;
        }
    }

    w.robot.position = config.field.clamp(w.robot.position);
    w.ball = config.field.clamp(w.ball);
    w.clock += dt;
    w.tick += 1;
    remember_sighting(&mut w, config);
    Ok(w)
}

fn walk_toward(w: &mut WorldState, target: Point, dt: f64, p: &PhysicsConfig) {
    let pos = w.robot.position;
    let dist = pos.distance(target);
    if dist < EPS {
        return;
    }
    let desired = pos.bearing_to(target);
    let err = wrap_angle(desired - w.robot.heading);
    let max_turn = p.heading_slew * dt;
    w.robot.heading = wrap_angle(w.robot.heading + err.clamp(-max_turn, max_turn));
    let err = wrap_angle(desired - w.robot.heading);
    let forward = (p.walk_speed * dt * err.cos().max(0.0)).min(dist);
    let h = w.robot.heading;
    w.robot.position = Point::new(pos.x + forward * h.cos(), pos.y + forward * h.sin());
}

/// The live world together with the configuration it runs under. This is the
/// world type the director and skill commanders see.
#[derive(Debug, Clone)]
pub struct SimFrame {
    pub state: WorldState,
    pub config: Arc<SimConfig>,
}

impl SimFrame {
    pub fn new(state: WorldState, config: Arc<SimConfig>) -> Self {
        SimFrame { state, config }
    }

    pub fn observe(&self) -> BallObservation {
        observe_ball(&self.state, &self.config)
    }
}

impl WorldModel for SimFrame {
    fn condition(&self, id: &ConditionId) -> bool {
        use conditions::*;
        match id.as_str() {
            UPRIGHT => !self.state.fallen,
            FALLEN => self.state.fallen,
            STABLE_STANCE => self.state.stable_stance,
            BALL_VISIBLE => ball_in_view(&self.state, &self.config),
            BALL_IN_REACH => ball_in_reach(&self.state, &self.config),
            other => {
                tracing::warn!(condition = other, "unknown condition evaluates to false");
                false
            }
        }
    }
}
