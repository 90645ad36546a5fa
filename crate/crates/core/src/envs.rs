//! Deterministic continuous-control tasks with exposed ground-truth dynamics.
//!
//! Observations, actions and rewards are `f32`; each transition is computed in
//! `f64` from the stored `f32` inputs and rounded once. An episode step is
//! literally the oracle step applied to the current observation, so stored
//! rollouts are reproduced bit-for-bit by [`EnvOracle::oracle_step`].

use std::f64::consts::PI;

use rand::Rng as _;

use crate::data::{TransitionDataset, TransitionSchema};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Static description of a task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvSpec {
    pub name: &'static str,
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_low: f32,
    pub action_high: f32,
    pub max_episode_len: usize,
    pub has_terminal: bool,
}

impl EnvSpec {
    pub fn schema(&self) -> TransitionSchema {
        TransitionSchema::new(self.state_dim, self.action_dim, self.has_terminal)
            .expect("env dimensions are positive")
    }

    pub fn clip_action(&self, action: &[f32]) -> Vec<f32> {
        action.iter().map(|a| a.clamp(self.action_low, self.action_high)).collect()
    }
}

/// Ground-truth transition, callable on arbitrary observations.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleStep {
    pub next_obs: Vec<f32>,
    pub reward: f32,
    pub terminal: bool,
}

pub trait EnvOracle: Sync {
    fn spec(&self) -> EnvSpec;

    /// Pure transition from `obs` under `action` (clipped to bounds).
    fn oracle_step(&self, obs: &[f32], action: &[f32]) -> Result<OracleStep>;
}

/// Result of [`Environment::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_obs: Vec<f32>,
    pub reward: f32,
    pub terminal: bool,
    pub truncated: bool,
}

/// An episodic instance of a task.
#[derive(Debug, Clone)]
pub struct Environment {
    kind: EnvKind,
    obs: Vec<f32>,
    t: usize,
    clipped_actions: usize,
}

/// Available tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    PointMass,
    Pendulum,
}

impl EnvKind {
    pub const ALL: [EnvKind; 2] = [EnvKind::PointMass, EnvKind::Pendulum];

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "pointmass" | "point_mass" | "pointmass2d" => Ok(EnvKind::PointMass),
            "pendulum" => Ok(EnvKind::Pendulum),
            other => Err(Error::Config(format!(
                "unknown environment {other:?} (expected pointmass or pendulum)"
            ))),
        }
    }

    /// The task whose transition layout is `schema`, if any.
    pub fn for_schema(schema: &TransitionSchema) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.spec().schema() == *schema)
    }

    pub fn name(&self) -> &'static str {
        self.spec().name
    }

    pub fn spec(&self) -> EnvSpec {
        match self {
            EnvKind::PointMass => PointMass2D.spec(),
            EnvKind::Pendulum => Pendulum.spec(),
        }
    }

    pub fn oracle(&self) -> &'static dyn EnvOracle {
        match self {
            EnvKind::PointMass => &PointMass2D,
            EnvKind::Pendulum => &Pendulum,
        }
    }

    pub fn make(&self) -> Environment {
        Environment {
            kind: *self,
            obs: vec![0.0; self.spec().state_dim],
            t: 0,
            clipped_actions: 0,
        }
    }
}

impl Environment {
    pub fn kind(&self) -> EnvKind {
        self.kind
    }

    pub fn spec(&self) -> EnvSpec {
        self.kind.spec()
    }

    pub fn observation(&self) -> &[f32] {
        &self.obs
    }

    /// Steps taken in the current episode.
    pub fn elapsed(&self) -> usize {
        self.t
    }

    /// Out-of-bounds actions seen so far (each was clipped before use).
    pub fn clipped_actions(&self) -> usize {
        self.clipped_actions
    }

    /// Samples an initial state.
    pub fn reset(&mut self, rng: &mut Rng) -> Vec<f32> {
        self.obs = match self.kind {
            EnvKind::PointMass => vec![
                rng.random_range(-1.0f32..=1.0),
                rng.random_range(-1.0f32..=1.0),
                0.0,
                0.0,
            ],
            EnvKind::Pendulum => {
                let theta: f64 = rng.random_range(-PI..=PI);
                let vel: f64 = rng.random_range(-1.0..=1.0);
                vec![theta.cos() as f32, theta.sin() as f32, vel as f32]
            }
        };
        self.t = 0;
        self.obs.clone()
    }

    /// Places the environment at an arbitrary observation.
    pub fn set_observation(&mut self, obs: &[f32]) -> Result<()> {
        if obs.len() != self.spec().state_dim {
            return Err(Error::invalid("observation width does not match the task"));
        }
        self.obs = obs.to_vec();
        self.t = 0;
        Ok(())
    }

    pub fn step(&mut self, action: &[f32]) -> Result<StepResult> {
        let spec = self.spec();
        if action.len() != spec.action_dim {
            return Err(Error::invalid(format!(
                "action has {} entries, expected {}",
                action.len(),
                spec.action_dim
            )));
        }
        if self.obs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidState("non-finite environment state".into()));
        }
        if action.iter().any(|a| *a < spec.action_low || *a > spec.action_high) {
            self.clipped_actions += 1;
        }
        let out = self.kind.oracle().oracle_step(&self.obs, action).map_err(|e| match e {
            Error::InvalidDomain(m) => Error::InvalidState(m),
            other => other,
        })?;
        self.t += 1;
        self.obs.clone_from(&out.next_obs);
        Ok(StepResult {
            truncated: !out.terminal && self.t >= spec.max_episode_len,
            next_obs: out.next_obs,
            reward: out.reward,
            terminal: out.terminal,
        })
    }
}

fn check_finite(obs: &[f32], action: &[f32]) -> Result<()> {
    if obs.iter().chain(action).any(|v| !v.is_finite()) {
        return Err(Error::InvalidDomain("non-finite state or action".into()));
    }
    Ok(())
}

/// Point mass on the plane driven toward the goal `(1, 1)`.
///
/// State `(x, y, vx, vy)`, action `(ax, ay) ∈ [−1, 1]²`:
/// `v' = 0.95 v + 0.1 a`, `p' = p + 0.05 v'`, reward `−‖p' − g‖`,
/// terminal when `‖p' − g‖ < 0.1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PointMass2D;

impl PointMass2D {
    pub const GOAL: [f64; 2] = [1.0, 1.0];
    pub const GOAL_RADIUS: f64 = 0.1;
}

impl EnvOracle for PointMass2D {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            name: "pointmass",
            state_dim: 4,
            action_dim: 2,
            action_low: -1.0,
            action_high: 1.0,
            max_episode_len: 200,
            has_terminal: true,
        }
    }

    fn oracle_step(&self, obs: &[f32], action: &[f32]) -> Result<OracleStep> {
        if obs.len() != 4 || action.len() != 2 {
            return Err(Error::invalid("point mass expects a 4-d state and 2-d action"));
        }
        check_finite(obs, action)?;
        let a = [
            f64::from(action[0].clamp(-1.0, 1.0)),
            f64::from(action[1].clamp(-1.0, 1.0)),
        ];
        let s: Vec<f64> = obs.iter().map(|&v| f64::from(v)).collect();
        let vx = 0.95 * s[2] + 0.1 * a[0];
        let vy = 0.95 * s[3] + 0.1 * a[1];
        let x = s[0] + 0.05 * vx;
        let y = s[1] + 0.05 * vy;
        let dist = ((x - Self::GOAL[0]).powi(2) + (y - Self::GOAL[1]).powi(2)).sqrt();
        Ok(OracleStep {
            next_obs: vec![x as f32, y as f32, vx as f32, vy as f32],
            reward: -dist as f32,
            terminal: dist < Self::GOAL_RADIUS,
        })
    }
}

/// Swing-up pendulum observed as `(cos θ, sin θ, θ̇)`, torque `u ∈ [−2, 2]`.
///
/// `θ̇' = clip(θ̇ + 3g/(2l) sin θ dt + 3/(m l²) u dt, ±8)`, `θ' = θ + θ̇' dt`,
/// reward `−(wrap(θ)² + 0.1 θ̇² + 0.001 u²)` on the pre-step state, no terminals.
#[derive(Debug, Clone, Copy, Default)]
pub struct Pendulum;

impl Pendulum {
    pub const G: f64 = 10.0;
    pub const LENGTH: f64 = 1.0;
    pub const MASS: f64 = 1.0;
    pub const DT: f64 = 0.05;
    pub const MAX_SPEED: f64 = 8.0;
    pub const MAX_TORQUE: f32 = 2.0;
    /// Largest accepted deviation of `‖(cos, sin)‖` from 1.
    pub const NORM_TOLERANCE: f64 = 0.2;
}

impl EnvOracle for Pendulum {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            name: "pendulum",
            state_dim: 3,
            action_dim: 1,
            action_low: -Self::MAX_TORQUE,
            action_high: Self::MAX_TORQUE,
            max_episode_len: 200,
            has_terminal: false,
        }
    }

    fn oracle_step(&self, obs: &[f32], action: &[f32]) -> Result<OracleStep> {
        if obs.len() != 3 || action.len() != 1 {
            return Err(Error::invalid("pendulum expects a 3-d observation and 1-d action"));
        }
        check_finite(obs, action)?;
        let (c, s) = (f64::from(obs[0]), f64::from(obs[1]));
        let norm = c.hypot(s);
        if (norm - 1.0).abs() > Self::NORM_TOLERANCE {
            return Err(Error::InvalidDomain(format!(
                "(cos, sin) norm {norm:.4} deviates from 1 by more than {}",
                Self::NORM_TOLERANCE
            )));
        }
        let theta = (s / norm).atan2(c / norm);
        let vel = f64::from(obs[2]);
        let u = f64::from(action[0].clamp(-Self::MAX_TORQUE, Self::MAX_TORQUE));
        let reward = -(theta * theta + 0.1 * vel * vel + 0.001 * u * u);
        let accel = 3.0 * Self::G / (2.0 * Self::LENGTH) * theta.sin()
            + 3.0 / (Self::MASS * Self::LENGTH * Self::LENGTH) * u;
        let new_vel = (vel + accel * Self::DT).clamp(-Self::MAX_SPEED, Self::MAX_SPEED);
        let new_theta = theta + new_vel * Self::DT;
        Ok(OracleStep {
            next_obs: vec![new_theta.cos() as f32, new_theta.sin() as f32, new_vel as f32],
            reward: reward as f32,
            terminal: false,
        })
    }
}

/// Deterministic or stochastic action source for data collection and evaluation.
pub trait Policy {
    fn act(&self, obs: &[f32], rng: &mut Rng) -> Vec<f32>;
}

/// Uniform random actions within the task's bounds.
#[derive(Debug, Clone, Copy)]
pub struct RandomPolicy {
    pub spec: EnvSpec,
}

impl Policy for RandomPolicy {
    fn act(&self, _obs: &[f32], rng: &mut Rng) -> Vec<f32> {
        (0..self.spec.action_dim)
            .map(|_| rng.random_range(self.spec.action_low..=self.spec.action_high))
            .collect()
    }
}

/// Behaviour used to collect a dataset.
pub enum BehaviorPolicy<'a> {
    Random,
    /// A partially trained policy whose action is replaced by a uniform random
    /// one with probability `epsilon`.
    Mixed {
        policy: Option<&'a dyn Policy>,
        epsilon: f64,
    },
    Expert {
        policy: Option<&'a dyn Policy>,
    },
}

/// Rolls out `policy` until `n_transitions` rows are collected.
///
/// Episodes end on termination (`d = 1`) or truncation at the step limit
/// (`d = 0`); the final episode may be cut short.
pub fn collect_dataset(
    kind: EnvKind,
    policy: &BehaviorPolicy<'_>,
    n_transitions: usize,
    seed: u64,
) -> Result<TransitionDataset> {
    if n_transitions == 0 {
        return Err(Error::invalid("n_transitions must be at least 1"));
    }
    let (learned, epsilon): (Option<&dyn Policy>, f64) = match policy {
        BehaviorPolicy::Random => (None, 1.0),
        BehaviorPolicy::Mixed { policy, epsilon } => {
            if !(0.0..=1.0).contains(epsilon) {
                return Err(Error::Config(format!("epsilon {epsilon} outside [0, 1]")));
            }
            (
                Some(policy.ok_or_else(|| {
                    Error::Config("mixed behaviour policy needs a policy checkpoint".into())
                })?),
                *epsilon,
            )
        }
        BehaviorPolicy::Expert { policy } => (
            Some(policy.ok_or_else(|| {
                Error::Config("expert behaviour policy needs a policy checkpoint".into())
            })?),
            0.0,
        ),
    };
    let spec = kind.spec();
    let schema = spec.schema();
    let random = RandomPolicy { spec };
    let mut env = kind.make();
    let mut r = rng::seeded(seed);
    let mut rows = Vec::with_capacity(n_transitions * schema.row_dim());
    let mut obs = env.reset(&mut r);
    for _ in 0..n_transitions {
        let explore = epsilon >= 1.0 || (epsilon > 0.0 && r.random_bool(epsilon));
        let raw = match (explore, learned) {
            (false, Some(p)) => p.act(&obs, &mut r),
            _ => random.act(&obs, &mut r),
        };
        let action = spec.clip_action(&raw);
        let step = env.step(&action)?;
        rows.extend_from_slice(&obs);
        rows.extend_from_slice(&action);
        rows.push(step.reward);
        rows.extend_from_slice(&step.next_obs);
        if spec.has_terminal {
            rows.push(f32::from(u8::from(step.terminal)));
        }
        obs = if step.terminal || step.truncated {
            env.reset(&mut r)
        } else {
            step.next_obs
        };
    }
    TransitionDataset::new(schema, rows)
}
