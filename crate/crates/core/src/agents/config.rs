use crate::error::{Error, Result};

/// Shared hyperparameters for both agents.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub gamma: f64,
    /// Target-network smoothing coefficient.
    pub tau: f64,
    pub lr: f64,
    /// Hidden layers per network; `layers × width`.
    pub layers: usize,
    pub width: usize,
    pub batch_size: usize,
    /// Gradient updates per environment step.
    pub utd: usize,
    /// TD3+BC: weight of the Q term relative to behaviour cloning.
    pub bc_alpha: f64,
    /// TD3+BC: target policy smoothing noise and its clip, as fractions of the
    /// action bound.
    pub policy_noise: f64,
    pub noise_clip: f64,
    pub policy_delay: usize,
    /// SAC: initial entropy temperature.
    pub init_temperature: f64,
    /// SAC: entropy target; `None` means `−action_dim`.
    pub target_entropy: Option<f64>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            lr: 3e-4,
            layers: 2,
            width: 256,
            batch_size: 256,
            utd: 1,
            bc_alpha: 2.5,
            policy_noise: 0.2,
            noise_clip: 0.5,
            policy_delay: 2,
            init_temperature: 1.0,
            target_entropy: None,
        }
    }
}

impl AgentConfig {
    /// Three hidden layers of width 512 with batch size 1024.
    pub fn larger() -> Self {
        Self {
            layers: 3,
            width: 512,
            batch_size: 1024,
            ..Self::default()
        }
    }

    /// Small networks sized for single-core toy-task experiments.
    pub fn desk() -> Self {
        Self {
            width: 64,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("agent.gamma must lie in (0, 1)");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("agent.tau must lie in (0, 1]");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("agent.lr must be positive");
        }
        if self.utd == 0 || self.layers == 0 || self.width == 0 || self.batch_size == 0 {
            return bad("agent.utd, agent.layers, agent.width and agent.batch_size must be at least 1");
        }
        if self.policy_delay == 0 {
            return bad("agent.policy_delay must be at least 1");
        }
        if !(self.bc_alpha >= 0.0 && self.policy_noise >= 0.0 && self.noise_clip >= 0.0) {
            return bad("agent.bc_alpha, agent.policy_noise and agent.noise_clip must be non-negative");
        }
        if !(self.init_temperature > 0.0) {
            return bad("agent.init_temperature must be positive");
        }
        Ok(())
    }
}
