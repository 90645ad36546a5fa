use rand_distr::{Distribution, StandardNormal};

use crate::data::TransitionDataset;
use crate::envs::{EnvSpec, Policy};
use crate::error::{Error, Result};
use crate::nn::{Adam, ResidualMlp};
use crate::rng::{self, Rng};

use super::nets::{action_part, concat, mlp, mse_grad, polyak, td_target, Batch};
use super::policy::{PolicyHead, PolicyNet};
use super::AgentConfig;

/// Guards the Q-scale denominator of the behaviour-cloning weight.
pub const LAMBDA_EPS: f64 = 1e-6;
/// Added to per-dimension state std before normalizing.
pub const OBS_STD_EPS: f64 = 1e-3;

/// Losses from one [`Td3Bc::update`]; the actor fields are `None` on
/// non-delay steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Td3BcLosses {
    pub critic: f64,
    pub actor: Option<f64>,
    pub lambda: Option<f64>,
}

/// Offline TD3 with a behaviour-cloning policy term.
#[derive(Debug, Clone)]
pub struct Td3Bc {
    cfg: AgentConfig,
    pub actor: PolicyNet,
    pub actor_target: ResidualMlp<f32>,
    pub q1: ResidualMlp<f32>,
    pub q2: ResidualMlp<f32>,
    pub q1_target: ResidualMlp<f32>,
    pub q2_target: ResidualMlp<f32>,
    actor_opt: Adam<f32>,
    q1_opt: Adam<f32>,
    q2_opt: Adam<f32>,
    updates: u64,
    rng: Rng,
}

/// Per-dimension state mean and std (`+ eps`) of a dataset.
pub fn state_moments(dataset: &TransitionDataset, eps: f64) -> (Vec<f32>, Vec<f32>) {
    let s = dataset.schema();
    let n = dataset.count().max(1) as f64;
    let sd = s.state_dim();
    let mut mean = vec![0.0f64; sd];
    let mut sq = vec![0.0f64; sd];
    for row in dataset.rows() {
        for (j, &v) in row[s.state_range()].iter().enumerate() {
            mean[j] += f64::from(v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    for row in dataset.rows() {
        for (j, &v) in row[s.state_range()].iter().enumerate() {
            sq[j] += (f64::from(v) - mean[j]).powi(2);
        }
    }
    let std = sq.iter().map(|q| ((q / n).sqrt() + eps) as f32).collect();
    (mean.into_iter().map(|m| m as f32).collect(), std)
}

impl Td3Bc {
    /// Fresh agent; states are normalized with `obs_mean` / `obs_std`.
    pub fn new(spec: &EnvSpec, cfg: &AgentConfig, obs_mean: Vec<f32>, obs_std: Vec<f32>, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if obs_mean.len() != spec.state_dim || obs_std.len() != spec.state_dim {
            return Err(Error::invalid("observation statistics do not match the state dimension"));
        }
        if !(spec.action_low == -spec.action_high && spec.action_high > 0.0) {
            return Err(Error::invalid("agents require symmetric action bounds"));
        }
        let mut r = rng::seeded(seed);
        let (sd, ad) = (spec.state_dim, spec.action_dim);
        let actor = mlp(sd, ad, cfg, &mut r)?;
        let q1 = mlp(sd + ad, 1, cfg, &mut r)?;
        let q2 = mlp(sd + ad, 1, cfg, &mut r)?;
        Ok(Self {
            cfg: cfg.clone(),
            actor_target: actor.clone(),
            actor_opt: Adam::new(actor.param_count()),
            actor: PolicyNet {
                head: PolicyHead::Deterministic,
                net: actor,
                action_scale: spec.action_high,
                obs_mean,
                obs_std,
            },
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            q1_opt: Adam::new(q1.param_count()),
            q2_opt: Adam::new(q2.param_count()),
            q1,
            q2,
            updates: 0,
            rng: r,
        })
    }

    /// Agent whose state normalization is fit on `dataset`.
    pub fn for_dataset(spec: &EnvSpec, cfg: &AgentConfig, dataset: &TransitionDataset, seed: u64) -> Result<Self> {
        let (m, s) = state_moments(dataset, OBS_STD_EPS);
        Self::new(spec, cfg, m, s, seed)
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// `α / (mean |Q| + ε)`.
    pub fn bc_lambda(alpha: f64, mean_abs_q: f64) -> f64 {
        alpha / (mean_abs_q + LAMBDA_EPS)
    }

    /// Critic regression targets `r + γ (1 − d) min(Q₁', Q₂')(s', π'(s') + ε)`
    /// with clipped smoothing noise `ε`.
    pub fn critic_targets(&mut self, batch: &Batch) -> Result<Vec<f64>> {
        let (sd, ad) = (batch.state_dim, batch.action_dim);
        let cfg = &self.cfg;
        let scale = f64::from(self.actor.action_scale);
        let s2 = self.actor.normalize(&batch.next_states);
        let next = self.actor_target.predict(&s2, None)?;
        let noise_clip = cfg.noise_clip * scale;
        let a2: Vec<f32> = next
            .iter()
            .map(|&u| {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                let eps = (z * cfg.policy_noise * scale).clamp(-noise_clip, noise_clip);
                (scale * f64::from(u.tanh()) + eps).clamp(-scale, scale) as f32
            })
            .collect();
        let sa2 = concat(&s2, &a2, sd, ad);
        let t1 = self.q1_target.predict(&sa2, None)?;
        let t2 = self.q2_target.predict(&sa2, None)?;
        Ok((0..batch.len)
            .map(|i| td_target(batch.rewards[i], batch.dones[i], cfg.gamma, f64::from(t1[i].min(t2[i]))))
            .collect())
    }

    /// Policy loss `−λ mean Q₁(s, π(s)) + mean ‖π(s) − a‖²` with the
    /// detached weight `λ = α / (mean |Q₁| + ε)`, and its parameter gradient.
    pub fn actor_gradient(&self, batch: &Batch) -> Result<(f64, Vec<f32>, f64)> {
        let (sd, ad, n) = (batch.state_dim, batch.action_dim, batch.len);
        let scale = f64::from(self.actor.action_scale);
        let s = self.actor.normalize(&batch.states);
        let (u, acache) = self.actor.net.forward(&s, None)?;
        let t: Vec<f32> = u.iter().map(|v| v.tanh()).collect();
        let pi: Vec<f32> = t.iter().map(|&v| (scale * f64::from(v)) as f32).collect();
        let spi = concat(&s, &pi, sd, ad);
        let (q, qcache) = self.q1.forward(&spi, None)?;
        let mean_abs_q = q.iter().map(|v| f64::from(v.abs())).sum::<f64>() / n as f64;
        let lambda = Self::bc_lambda(self.cfg.bc_alpha, mean_abs_q);
        let dq = self.q1.input_grad(&qcache, &vec![1.0; n])?;
        let dq_da = action_part(&dq, sd, ad);
        let mut bc = 0.0;
        let du: Vec<f32> = (0..n * ad)
            .map(|k| {
                let diff = f64::from(pi[k]) - f64::from(batch.actions[k]);
                bc += diff * diff;
                let da = (-lambda * f64::from(dq_da[k]) + 2.0 * diff) / n as f64;
                (da * scale * (1.0 - f64::from(t[k]).powi(2))) as f32
            })
            .collect();
        let loss = -lambda * q.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64 + bc / n as f64;
        let grads = self.actor.net.backward(&acache, &du)?;
        Ok((loss, grads.params, lambda))
    }

    /// One critic step; every `policy_delay`-th call also updates the actor and
    /// all target networks.
    pub fn update(&mut self, batch: &Batch) -> Result<Td3BcLosses> {
        let (sd, ad) = (batch.state_dim, batch.action_dim);
        let y = self.critic_targets(batch)?;
        let cfg = &self.cfg;
        let s = self.actor.normalize(&batch.states);
        let sa = concat(&s, &batch.actions, sd, ad);
        let mut critic = 0.0;
        for (q, opt) in [(&mut self.q1, &mut self.q1_opt), (&mut self.q2, &mut self.q2_opt)] {
            let (out, cache) = q.forward(&sa, None)?;
            let (loss, g) = mse_grad(&out, &y);
            critic += loss;
            let grads = q.backward(&cache, &g)?;
            opt.step(q.params_mut(), &grads.params, cfg.lr);
        }

        self.updates += 1;
        if !self.updates.is_multiple_of(cfg.policy_delay as u64) {
            return Ok(Td3BcLosses { critic, actor: None, lambda: None });
        }
        let (actor_loss, grads, lambda) = self.actor_gradient(batch)?;
        let cfg = &self.cfg;
        self.actor_opt.step(self.actor.net.params_mut(), &grads, cfg.lr);
        polyak(self.actor_target.params_mut(), self.actor.net.params(), cfg.tau);
        polyak(self.q1_target.params_mut(), self.q1.params(), cfg.tau);
        polyak(self.q2_target.params_mut(), self.q2.params(), cfg.tau);
        Ok(Td3BcLosses {
            critic,
            actor: Some(actor_loss),
            lambda: Some(lambda),
        })
    }
}

impl Policy for Td3Bc {
    fn act(&self, obs: &[f32], rng: &mut Rng) -> Vec<f32> {
        self.actor.act(obs, rng)
    }
}
