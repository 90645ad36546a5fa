use rand::Rng as _;

use crate::data::TransitionDataset;
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::rng;

use super::eval::{evaluate_policy, EvalPoint, LossMeter, DEFAULT_EVAL_EPISODES};
use super::nets::Batch;
use super::td3bc::Td3Bc;
use super::AgentConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineConfig {
    pub steps: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        Self {
            steps: 100_000,
            eval_every: 5_000,
            eval_episodes: DEFAULT_EVAL_EPISODES,
        }
    }
}

/// Checks that `dataset` has the layout of `kind`'s transitions.
pub fn check_dataset_env(dataset: &TransitionDataset, kind: EnvKind) -> Result<()> {
    let expected = kind.spec().schema();
    if dataset.schema() != expected {
        return Err(Error::Config(format!(
            "dataset schema {:?} does not match environment {} schema {:?}",
            dataset.schema(),
            kind.name(),
            expected
        )));
    }
    Ok(())
}

/// Trains TD3+BC purely on `dataset`, evaluating every `eval_every` steps and
/// after the last one.
pub fn offline_train(
    kind: EnvKind,
    agent_cfg: &AgentConfig,
    dataset: &TransitionDataset,
    cfg: &OfflineConfig,
    seed: u64,
) -> Result<(Td3Bc, Vec<EvalPoint>)> {
    check_dataset_env(dataset, kind)?;
    if dataset.is_empty() {
        return Err(Error::invalid("offline training needs a non-empty dataset"));
    }
    if cfg.eval_every == 0 || cfg.eval_episodes == 0 {
        return Err(Error::Config("offline.eval_every and offline.eval_episodes must be at least 1".into()));
    }
    let schema = dataset.schema();
    let spec = kind.spec();
    let mut agent = Td3Bc::for_dataset(&spec, agent_cfg, dataset, rng::derive_seed(seed, 1))?;
    let mut sampler = rng::seeded(rng::derive_seed(seed, 2));
    let eval_seed = rng::derive_seed(seed, 3);
    let n = dataset.count();
    let dim = schema.row_dim();
    let mut rows = Vec::with_capacity(agent_cfg.batch_size * dim);
    let mut meter = LossMeter::default();
    let mut trace = Vec::new();
    for step in 1..=cfg.steps {
        rows.clear();
        for _ in 0..agent_cfg.batch_size {
            rows.extend_from_slice(dataset.row(sampler.random_range(0..n)));
        }
        let l = agent.update(&Batch::from_rows(&schema, &rows))?;
        meter.add(0, l.critic);
        if let Some(a) = l.actor {
            meter.add(1, a);
        }
        if step % cfg.eval_every == 0 || step == cfg.steps {
            let e = evaluate_policy(kind, &agent.actor, cfg.eval_episodes, eval_seed)?;
            let [c, a, _] = meter.take();
            trace.push(EvalPoint {
                step,
                mean_return: e.mean,
                std_return: e.std,
                critic_loss: c,
                actor_loss: a,
                temperature: None,
            });
        }
    }
    Ok((agent, trace))
}
