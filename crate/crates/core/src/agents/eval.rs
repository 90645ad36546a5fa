use std::io::Write;

use crate::envs::{EnvKind, Policy};
use crate::error::{Error, Result};
use crate::rng;

/// Returns of a batch of evaluation episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub returns: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl EvalResult {
    pub fn from_returns(returns: Vec<f64>) -> Self {
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let std = (returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
        Self { returns, mean, std }
    }
}

pub const DEFAULT_EVAL_EPISODES: usize = 10;

/// Runs `episodes` full episodes with the policy's deterministic action;
/// episode `k` starts from a state drawn with stream `k` of `seed`.
pub fn evaluate_policy(kind: EnvKind, policy: &dyn Policy, episodes: usize, seed: u64) -> Result<EvalResult> {
    if episodes == 0 {
        return Err(Error::invalid("evaluation needs at least one episode"));
    }
    let spec = kind.spec();
    let mut returns = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        let mut r = rng::stream(seed, ep as u64);
        let mut env = kind.make();
        let mut obs = env.reset(&mut r);
        let mut total = 0.0;
        for _ in 0..spec.max_episode_len {
            let a = policy.act(&obs, &mut r);
            let step = env.step(&spec.clip_action(&a))?;
            total += f64::from(step.reward);
            if step.terminal || step.truncated {
                break;
            }
            obs = step.next_obs;
        }
        returns.push(total);
    }
    Ok(EvalResult::from_returns(returns))
}

/// One row of a training trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    /// Gradient steps (offline) or environment steps (online).
    pub step: usize,
    pub mean_return: f64,
    pub std_return: f64,
    /// Loss means since the previous evaluation; `None` when none were taken.
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub temperature: Option<f64>,
}

/// Writes `step,mean_return,std_return,critic_loss,actor_loss,temperature`.
pub fn write_trace_csv<W: Write>(w: W, trace: &[EvalPoint]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["step", "mean_return", "std_return", "critic_loss", "actor_loss", "temperature"])?;
    for p in trace {
        csv.write_record([
            p.step.to_string(),
            p.mean_return.to_string(),
            p.std_return.to_string(),
            opt(p.critic_loss),
            opt(p.actor_loss),
            opt(p.temperature),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Running means of losses between evaluations.
#[derive(Debug, Default)]
pub(crate) struct LossMeter {
    sums: [f64; 3],
    counts: [usize; 3],
}

impl LossMeter {
    pub fn add(&mut self, slot: usize, v: f64) {
        self.sums[slot] += v;
        self.counts[slot] += 1;
    }

    pub fn take(&mut self) -> [Option<f64>; 3] {
        let out = std::array::from_fn(|k| (self.counts[k] > 0).then(|| self.sums[k] / self.counts[k] as f64));
        *self = Self::default();
        out
    }
}
