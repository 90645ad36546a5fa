use rand_distr::{Distribution, StandardNormal};

use crate::envs::{EnvSpec, Policy};
use crate::error::{Error, Result};
use crate::nn::{Adam, ForwardCache, ResidualMlp};
use crate::rng::{self, Rng};

use super::nets::{action_part, concat, mlp, mse_grad, polyak, td_target, Batch};
use super::policy::{PolicyHead, PolicyNet, LOG_STD_MAX, LOG_STD_MIN};
use super::AgentConfig;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln(1 − tanh²u)`, stable for large `|u|`.
pub fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// Losses from one [`Sac::update`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SacLosses {
    pub critic: f64,
    pub actor: f64,
    pub temperature: f64,
    /// Mean `−log π` of the batch's reparameterized actions.
    pub entropy: f64,
}

/// Reparameterized actions and everything needed to differentiate them.
struct Sampled {
    cache: ForwardCache<f32>,
    /// Pre-squash Gaussian draw, its noise and scale, and `tanh(lraw)`.
    u: Vec<f64>,
    eps: Vec<f64>,
    sigma: Vec<f64>,
    raw_tanh: Vec<f64>,
    actions: Vec<f32>,
    log_prob: Vec<f64>,
}

/// Soft actor-critic with twin critics and a learned temperature.
#[derive(Debug, Clone)]
pub struct Sac {
    cfg: AgentConfig,
    pub actor: PolicyNet,
    pub q1: ResidualMlp<f32>,
    pub q2: ResidualMlp<f32>,
    pub q1_target: ResidualMlp<f32>,
    pub q2_target: ResidualMlp<f32>,
    log_temperature: f64,
    target_entropy: f64,
    actor_opt: Adam<f32>,
    q1_opt: Adam<f32>,
    q2_opt: Adam<f32>,
    temp_opt: Adam<f64>,
    updates: u64,
    rng: Rng,
}

impl Sac {
    pub fn new(spec: &EnvSpec, cfg: &AgentConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if !(spec.action_low == -spec.action_high && spec.action_high > 0.0) {
            return Err(Error::invalid("agents require symmetric action bounds"));
        }
        let mut r = rng::seeded(seed);
        let (sd, ad) = (spec.state_dim, spec.action_dim);
        let actor = mlp(sd, 2 * ad, cfg, &mut r)?;
        let q1 = mlp(sd + ad, 1, cfg, &mut r)?;
        let q2 = mlp(sd + ad, 1, cfg, &mut r)?;
        Ok(Self {
            cfg: cfg.clone(),
            actor_opt: Adam::new(actor.param_count()),
            actor: PolicyNet {
                head: PolicyHead::SquashedGaussian,
                net: actor,
                action_scale: spec.action_high,
                obs_mean: vec![0.0; sd],
                obs_std: vec![1.0; sd],
            },
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            q1_opt: Adam::new(q1.param_count()),
            q2_opt: Adam::new(q2.param_count()),
            q1,
            q2,
            log_temperature: cfg.init_temperature.ln(),
            target_entropy: cfg.target_entropy.unwrap_or(-(ad as f64)),
            temp_opt: Adam::new(1),
            updates: 0,
            rng: r,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn temperature(&self) -> f64 {
        self.log_temperature.exp()
    }

    pub fn set_temperature(&mut self, t: f64) {
        self.log_temperature = t.ln();
    }

    pub fn target_entropy(&self) -> f64 {
        self.target_entropy
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    fn sample(&self, states: &[f32], rng: &mut Rng) -> Result<Sampled> {
        let ad = self.actor.action_dim();
        let scale = f64::from(self.actor.action_scale);
        let (out, cache) = self.actor.net.forward(states, None)?;
        let n = out.len() / (2 * ad);
        let mut s = Sampled {
            cache,
            u: Vec::with_capacity(n * ad),
            eps: Vec::with_capacity(n * ad),
            sigma: Vec::with_capacity(n * ad),
            raw_tanh: Vec::with_capacity(n * ad),
            actions: Vec::with_capacity(n * ad),
            log_prob: Vec::with_capacity(n),
        };
        for row in out.chunks_exact(2 * ad) {
            let mut lp = 0.0;
            for j in 0..ad {
                let mu = f64::from(row[j]);
                let th = f64::from(row[ad + j]).tanh();
                let log_std = LOG_STD_MIN + 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (th + 1.0);
                let sigma = log_std.exp();
                let eps: f64 = StandardNormal.sample(rng);
                let u = mu + sigma * eps;
                lp += -0.5 * eps * eps - HALF_LN_2PI - log_std - scale.ln() - log_one_minus_tanh_sq(u);
                s.u.push(u);
                s.eps.push(eps);
                s.sigma.push(sigma);
                s.raw_tanh.push(th);
                s.actions.push((scale * u.tanh()) as f32);
            }
            s.log_prob.push(lp);
        }
        Ok(s)
    }

    /// Stochastic action for exploration.
    pub fn sample_action(&self, obs: &[f32], rng: &mut Rng) -> Result<Vec<f32>> {
        Ok(self.sample(obs, rng)?.actions)
    }

    /// Soft TD target `r + γ (1 − d)(min Q'(s', a') − α log π(a'|s'))`.
    pub fn soft_target(reward: f32, done: f32, gamma: f64, min_q: f64, temperature: f64, log_prob: f64) -> f64 {
        td_target(reward, done, gamma, min_q - temperature * log_prob)
    }

    fn targets_with(&self, batch: &Batch, alpha: f64, rng: &mut Rng) -> Result<Vec<f64>> {
        let (sd, ad) = (batch.state_dim, batch.action_dim);
        let next = self.sample(&batch.next_states, rng)?;
        let sa2 = concat(&batch.next_states, &next.actions, sd, ad);
        let t1 = self.q1_target.predict(&sa2, None)?;
        let t2 = self.q2_target.predict(&sa2, None)?;
        Ok((0..batch.len)
            .map(|i| {
                let min_q = f64::from(t1[i].min(t2[i]));
                Self::soft_target(batch.rewards[i], batch.dones[i], self.cfg.gamma, min_q, alpha, next.log_prob[i])
            })
            .collect())
    }

    /// Soft critic targets for `batch` with freshly sampled next actions.
    pub fn critic_targets(&mut self, batch: &Batch) -> Result<Vec<f64>> {
        let mut rng = std::mem::replace(&mut self.rng, rng::seeded(0));
        let out = self.targets_with(batch, self.temperature(), &mut rng);
        self.rng = rng;
        out
    }

    /// Critic, actor and temperature step followed by a target update.
    pub fn update(&mut self, batch: &Batch) -> Result<SacLosses> {
        let (sd, ad, n) = (batch.state_dim, batch.action_dim, batch.len);
        let cfg = self.cfg.clone();
        let alpha = self.temperature();
        let scale = f64::from(self.actor.action_scale);
        let mut rng = std::mem::replace(&mut self.rng, rng::seeded(0));

        // critic
        let y = self.targets_with(batch, alpha, &mut rng)?;
        let sa = concat(&batch.states, &batch.actions, sd, ad);
        let mut critic = 0.0;
        for (q, opt) in [(&mut self.q1, &mut self.q1_opt), (&mut self.q2, &mut self.q2_opt)] {
            let (out, cache) = q.forward(&sa, None)?;
            let (loss, g) = mse_grad(&out, &y);
            critic += loss;
            let grads = q.backward(&cache, &g)?;
            opt.step(q.params_mut(), &grads.params, cfg.lr);
        }

        // actor
        let cur = self.sample(&batch.states, &mut rng)?;
        self.rng = rng;
        let spi = concat(&batch.states, &cur.actions, sd, ad);
        let (v1, c1) = self.q1.forward(&spi, None)?;
        let (v2, c2) = self.q2.forward(&spi, None)?;
        let pick1: Vec<f32> = (0..n).map(|i| f32::from(u8::from(v1[i] <= v2[i]))).collect();
        let pick2: Vec<f32> = pick1.iter().map(|p| 1.0 - p).collect();
        let g1 = action_part(&self.q1.input_grad(&c1, &pick1)?, sd, ad);
        let g2 = action_part(&self.q2.input_grad(&c2, &pick2)?, sd, ad);
        let mut out_grad = vec![0.0f32; n * 2 * ad];
        let mut actor_loss = 0.0;
        for i in 0..n {
            actor_loss += alpha * cur.log_prob[i] - f64::from(v1[i].min(v2[i]));
            for j in 0..ad {
                let k = i * ad + j;
                let t = cur.u[k].tanh();
                let dq_du = f64::from(g1[k] + g2[k]) * scale * (1.0 - t * t);
                let se = cur.sigma[k] * cur.eps[k];
                let d_mu = alpha * 2.0 * t - dq_du;
                let d_logstd = alpha * (-1.0 + 2.0 * t * se) - dq_du * se;
                let d_raw = d_logstd * 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (1.0 - cur.raw_tanh[k].powi(2));
                out_grad[i * 2 * ad + j] = (d_mu / n as f64) as f32;
                out_grad[i * 2 * ad + ad + j] = (d_raw / n as f64) as f32;
            }
        }
        let grads = self.actor.net.backward(&cur.cache, &out_grad)?;
        self.actor_opt.step(self.actor.net.params_mut(), &grads.params, cfg.lr);

        // temperature
        let mean_lp = cur.log_prob.iter().sum::<f64>() / n as f64;
        let mut lt = [self.log_temperature];
        self.temp_opt.step(&mut lt, &[-(mean_lp + self.target_entropy)], cfg.lr);
        self.log_temperature = lt[0];

        polyak(self.q1_target.params_mut(), self.q1.params(), cfg.tau);
        polyak(self.q2_target.params_mut(), self.q2.params(), cfg.tau);
        self.updates += 1;
        Ok(SacLosses {
            critic,
            actor: actor_loss / n as f64,
            temperature: alpha,
            entropy: -mean_lp,
        })
    }
}

impl Policy for Sac {
    fn act(&self, obs: &[f32], rng: &mut Rng) -> Vec<f32> {
        self.actor.act(obs, rng)
    }
}
