use crate::data::TransitionSchema;
use crate::error::Result;
use crate::nn::{NetShape, ResidualMlp};
use crate::rng::Rng;

use super::AgentConfig;

/// `layers × width` network: an input projection followed by `layers − 1`
/// residual blocks.
pub(crate) fn mlp(in_dim: usize, out_dim: usize, cfg: &AgentConfig, rng: &mut Rng) -> Result<ResidualMlp<f32>> {
    ResidualMlp::new(
        NetShape {
            in_dim,
            out_dim,
            width: cfg.width,
            depth: cfg.layers - 1,
            rff_dim: 0,
        },
        rng,
    )
}

/// `target ← (1 − τ) target + τ online`, elementwise.
pub fn polyak(target: &mut [f32], online: &[f32], tau: f64) {
    for (t, &o) in target.iter_mut().zip(online) {
        *t = ((1.0 - tau) * f64::from(*t) + tau * f64::from(o)) as f32;
    }
}

/// Column-split view of a batch of flattened transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub len: usize,
    pub state_dim: usize,
    pub action_dim: usize,
    pub states: Vec<f32>,
    pub actions: Vec<f32>,
    pub rewards: Vec<f32>,
    pub next_states: Vec<f32>,
    /// Terminal flags; all zero for schemas without a terminal column.
    pub dones: Vec<f32>,
}

impl Batch {
    pub fn from_rows(schema: &TransitionSchema, rows: &[f32]) -> Self {
        let dim = schema.row_dim();
        let len = rows.len() / dim;
        let (sd, ad) = (schema.state_dim(), schema.action_dim());
        let mut b = Batch {
            len,
            state_dim: sd,
            action_dim: ad,
            states: Vec::with_capacity(len * sd),
            actions: Vec::with_capacity(len * ad),
            rewards: Vec::with_capacity(len),
            next_states: Vec::with_capacity(len * sd),
            dones: Vec::with_capacity(len),
        };
        for row in rows.chunks_exact(dim) {
            b.states.extend_from_slice(&row[schema.state_range()]);
            b.actions.extend_from_slice(&row[schema.action_range()]);
            b.rewards.push(row[schema.reward_index()]);
            b.next_states.extend_from_slice(&row[schema.next_state_range()]);
            b.dones.push(schema.terminal_index().map_or(0.0, |t| row[t]));
        }
        b
    }
}

/// Row-wise `[s, a]` concatenation.
pub(crate) fn concat(s: &[f32], a: &[f32], sd: usize, ad: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(s.len() + a.len());
    for (si, ai) in s.chunks_exact(sd).zip(a.chunks_exact(ad)) {
        out.extend_from_slice(si);
        out.extend_from_slice(ai);
    }
    out
}

/// Extracts the action part of `[s, a]` input gradients.
pub(crate) fn action_part(g: &[f32], sd: usize, ad: usize) -> Vec<f32> {
    g.chunks_exact(sd + ad).flat_map(|r| r[sd..].iter().copied()).collect()
}

/// Bootstrapped target `r + γ (1 − d) v`.
pub fn td_target(reward: f32, done: f32, gamma: f64, next_value: f64) -> f64 {
    f64::from(reward) + gamma * (1.0 - f64::from(done)) * next_value
}

/// Mean squared error of `q` against `y` and its gradient with respect to `q`.
pub(crate) fn mse_grad(q: &[f32], y: &[f64]) -> (f64, Vec<f32>) {
    let n = q.len() as f64;
    let mut loss = 0.0;
    let grad = q
        .iter()
        .zip(y)
        .map(|(&q, &y)| {
            let d = f64::from(q) - y;
            loss += d * d;
            (2.0 * d / n) as f32
        })
        .collect();
    (loss / n, grad)
}
