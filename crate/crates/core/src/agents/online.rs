use crate::data::{Normalizer, ReplayPair, RingBuffer, TransitionDataset, TransitionSchema};
use crate::edm::{generate, DenoiserConfig, DiffusionModel, DiffusionTrainer, EdmConfig};
use crate::envs::{EnvKind, Policy, RandomPolicy, StepResult};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

use super::eval::{evaluate_policy, EvalPoint, LossMeter, DEFAULT_EVAL_EPISODES};
use super::nets::Batch;
use super::sac::Sac;
use super::AgentConfig;

/// Environment interaction schedule shared by the online loops.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineConfig {
    pub total_steps: usize,
    /// Uniform random actions and no updates for this many initial steps.
    pub warmup: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Real replay capacity; `None` keeps every step.
    pub buffer_capacity: Option<usize>,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        Self {
            total_steps: 100_000,
            warmup: 1_000,
            eval_every: 1_000,
            eval_episodes: DEFAULT_EVAL_EPISODES,
            buffer_capacity: None,
        }
    }
}

impl OnlineConfig {
    fn validate(&self) -> Result<()> {
        if self.total_steps < self.warmup {
            return Err(Error::Config(format!(
                "online.total_steps {} is below online.warmup {}",
                self.total_steps, self.warmup
            )));
        }
        if self.eval_every == 0 || self.eval_episodes == 0 || self.buffer_capacity == Some(0) {
            return Err(Error::Config(
                "online.eval_every, online.eval_episodes and online.buffer_capacity must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn capacity(&self) -> usize {
        self.buffer_capacity.unwrap_or(self.total_steps).max(1)
    }
}

/// Generation schedule and diffusion settings for online SynthER.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntherOnlineConfig {
    /// Fraction of each batch drawn from real experience.
    pub ratio: f64,
    /// Real environment steps between generation rounds.
    pub real_per_round: usize,
    /// Rows generated per round.
    pub synth_per_round: usize,
    /// Diffusion gradient steps per round (continual fine-tuning).
    pub diffusion_steps_per_round: usize,
    pub synthetic_capacity: usize,
    pub denoiser: DenoiserConfig,
    pub edm: EdmConfig,
}

impl SyntherOnlineConfig {
    /// 1M rows every 10K real steps.
    pub fn full_scale() -> Self {
        Self {
            ratio: 0.5,
            real_per_round: 10_000,
            synth_per_round: 1_000_000,
            diffusion_steps_per_round: 10_000,
            synthetic_capacity: 1_000_000,
            denoiser: DenoiserConfig::default(),
            edm: EdmConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ratio) {
            return Err(Error::Config(format!("synther.ratio {} outside [0, 1]", self.ratio)));
        }
        if self.real_per_round == 0 || self.synth_per_round == 0 || self.synthetic_capacity == 0 {
            return Err(Error::Config(
                "synther.real_per_round, synther.synth_per_round and synther.synthetic_capacity must be at least 1".into(),
            ));
        }
        self.edm.validate()
    }
}

impl Default for SyntherOnlineConfig {
    /// Cadence scaled down by 10: 100K rows every 1K real steps.
    fn default() -> Self {
        Self {
            real_per_round: 1_000,
            synth_per_round: 100_000,
            synthetic_capacity: 1_000_000,
            ..Self::full_scale()
        }
    }
}

/// What happened in one generation round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    pub env_step: usize,
    pub final_loss: Option<f64>,
    pub generated: usize,
    /// Set when training or sampling failed and the round used real data only.
    pub fallback: Option<String>,
}

#[derive(Debug, Clone)]
pub struct OnlineResult {
    pub agent: Sac,
    pub trace: Vec<EvalPoint>,
    pub rounds: Vec<RoundLog>,
}

struct Seeds {
    env: u64,
    act: u64,
    sample: u64,
    agent: u64,
    eval: u64,
    model: u64,
    trainer: u64,
    generate: u64,
}

impl Seeds {
    fn new(seed: u64) -> Self {
        let d = |k| rng::derive_seed(seed, k);
        Self {
            env: d(1),
            act: d(2),
            sample: d(3),
            agent: d(4),
            eval: d(5),
            model: d(6),
            trainer: d(7),
            generate: d(8),
        }
    }
}

/// Environment stepping shared by both loops.
struct Actor {
    kind: EnvKind,
    env: crate::envs::Environment,
    obs: Vec<f32>,
    env_rng: Rng,
    act_rng: Rng,
}

impl Actor {
    fn new(kind: EnvKind, seeds: &Seeds) -> Self {
        let mut env = kind.make();
        let mut env_rng = rng::seeded(seeds.env);
        let obs = env.reset(&mut env_rng);
        Self {
            kind,
            env,
            obs,
            env_rng,
            act_rng: rng::seeded(seeds.act),
        }
    }

    /// Takes one step and returns the transition row.
    fn step(&mut self, agent: &Sac, random: bool, schema: &TransitionSchema) -> Result<Vec<f32>> {
        let spec = self.kind.spec();
        let action = if random {
            RandomPolicy { spec }.act(&self.obs, &mut self.act_rng)
        } else {
            spec.clip_action(&agent.sample_action(&self.obs, &mut self.act_rng)?)
        };
        let StepResult { next_obs, reward, terminal, truncated } = self.env.step(&action)?;
        let mut row = Vec::with_capacity(schema.row_dim());
        row.extend_from_slice(&self.obs);
        row.extend_from_slice(&action);
        row.push(reward);
        row.extend_from_slice(&next_obs);
        if schema.has_terminal() {
            row.push(f32::from(u8::from(terminal)));
        }
        self.obs = if terminal || truncated {
            self.env.reset(&mut self.env_rng)
        } else {
            next_obs
        };
        Ok(row)
    }
}

fn record_eval(
    kind: EnvKind,
    agent: &Sac,
    cfg: &OnlineConfig,
    seed: u64,
    step: usize,
    meter: &mut LossMeter,
    trace: &mut Vec<EvalPoint>,
) -> Result<()> {
    let e = evaluate_policy(kind, &agent.actor, cfg.eval_episodes, seed)?;
    let [c, a, t] = meter.take();
    trace.push(EvalPoint {
        step,
        mean_return: e.mean,
        std_return: e.std,
        critic_loss: c,
        actor_loss: a,
        temperature: t,
    });
    Ok(())
}

fn sac_step(agent: &mut Sac, batch: &Batch, meter: &mut LossMeter) -> Result<()> {
    let l = agent.update(batch)?;
    meter.add(0, l.critic);
    meter.add(1, l.actor);
    meter.add(2, l.temperature);
    Ok(())
}

/// Plain SAC with uniform replay and `agent_cfg.utd` updates per step.
pub fn sac_train(kind: EnvKind, agent_cfg: &AgentConfig, cfg: &OnlineConfig, seed: u64) -> Result<OnlineResult> {
    cfg.validate()?;
    let seeds = Seeds::new(seed);
    let spec = kind.spec();
    let schema = spec.schema();
    let mut agent = Sac::new(&spec, agent_cfg, seeds.agent)?;
    let mut actor = Actor::new(kind, &seeds);
    let mut buffer = RingBuffer::new(schema.row_dim(), cfg.capacity());
    let mut sampler = rng::seeded(seeds.sample);
    let mut rows = Vec::new();
    let mut meter = LossMeter::default();
    let mut trace = Vec::new();
    for t in 0..cfg.total_steps {
        let row = actor.step(&agent, t < cfg.warmup, &schema)?;
        buffer.push(&row);
        if t >= cfg.warmup {
            for _ in 0..agent_cfg.utd {
                rows.clear();
                buffer.sample_into(agent_cfg.batch_size, &mut sampler, &mut rows);
                sac_step(&mut agent, &Batch::from_rows(&schema, &rows), &mut meter)?;
            }
        }
        if (t + 1) % cfg.eval_every == 0 {
            record_eval(kind, &agent, cfg, seeds.eval, t + 1, &mut meter, &mut trace)?;
        }
    }
    Ok(OnlineResult { agent, trace, rounds: Vec::new() })
}

struct Generator {
    model: DiffusionModel,
    trainer: DiffusionTrainer,
}

/// One round of normalizer refit, fine-tuning and generation. Any numerical
/// failure is reported as `Err(message)` so the caller can fall back.
fn generation_round(
    gen: &mut Option<Generator>,
    replay: &ReplayPair,
    cfg: &SyntherOnlineConfig,
    seeds: &Seeds,
    round: u64,
) -> Result<std::result::Result<(Option<f64>, TransitionDataset), String>> {
    let schema = replay.schema();
    let real = replay.real.to_dataset(schema);
    if real.count() < 2 {
        return Ok(Err("fewer than two real rows".into()));
    }
    let norm = Normalizer::fit(&real)?;
    let g = match gen {
        Some(g) => {
            g.model.set_normalizer(norm)?;
            g
        }
        None => {
            let model = DiffusionModel::new(schema, norm, cfg.denoiser, cfg.edm.clone(), seeds.model)?;
            let trainer = DiffusionTrainer::new(&model, seeds.trainer);
            gen.insert(Generator { model, trainer })
        }
    };
    g.model.fit_data_range(&real);
    let normalized = g.model.normalizer().normalize(&real)?;
    let batch = g.model.config().batch_size_for(real.count(), true);
    let outcome = g
        .trainer
        .run(&mut g.model, normalized.as_slice(), cfg.diffusion_steps_per_round, batch)
        .and_then(|trace| {
            let rows = generate(&g.model, cfg.synth_per_round, rng::derive_seed(seeds.generate, round))?;
            Ok((trace.last().map(|p| p.loss), rows))
        });
    match outcome {
        Ok(done) => Ok(Ok(done)),
        Err(e @ (Error::Divergence { .. } | Error::Numeric(_))) => {
            *gen = None;
            Ok(Err(e.to_string()))
        }
        Err(e) => Err(e),
    }
}

/// A resumable online SynthER run; see [`online_synther_train`].
pub struct OnlineSession {
    kind: EnvKind,
    agent_cfg: AgentConfig,
    cfg: OnlineConfig,
    synther: Option<SyntherOnlineConfig>,
    seeds: Seeds,
    agent: Sac,
    actor: Actor,
    replay: ReplayPair,
    sampler: Rng,
    gen: Option<Generator>,
    fallback: bool,
    rounds: Vec<RoundLog>,
    meter: LossMeter,
    trace: Vec<EvalPoint>,
    t: usize,
}

impl OnlineSession {
    pub fn new(
        kind: EnvKind,
        agent_cfg: &AgentConfig,
        cfg: &OnlineConfig,
        synther: Option<&SyntherOnlineConfig>,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        if let Some(s) = synther {
            s.validate()?;
        }
        let seeds = Seeds::new(seed);
        let spec = kind.spec();
        let schema = spec.schema();
        let syn_cap = synther.map_or(1, |s| s.synthetic_capacity);
        Ok(Self {
            kind,
            agent_cfg: agent_cfg.clone(),
            cfg: cfg.clone(),
            synther: synther.cloned(),
            agent: Sac::new(&spec, agent_cfg, seeds.agent)?,
            actor: Actor::new(kind, &seeds),
            replay: ReplayPair::new(schema, cfg.capacity(), syn_cap, 1.0)?,
            sampler: rng::seeded(seeds.sample),
            seeds,
            gen: None,
            fallback: false,
            rounds: Vec::new(),
            meter: LossMeter::default(),
            trace: Vec::new(),
            t: 0,
        })
    }

    /// Environment steps taken so far.
    pub fn steps_done(&self) -> usize {
        self.t
    }

    pub fn is_finished(&self) -> bool {
        self.t >= self.cfg.total_steps
    }

    pub fn trace(&self) -> &[EvalPoint] {
        &self.trace
    }

    pub fn rounds(&self) -> &[RoundLog] {
        &self.rounds
    }

    pub fn agent(&self) -> &Sac {
        &self.agent
    }

    /// Runs up to `steps` more environment steps, stopping at `total_steps`.
    pub fn advance(&mut self, steps: usize) -> Result<()> {
        let schema = self.kind.spec().schema();
        let end = (self.t + steps).min(self.cfg.total_steps);
        while self.t < end {
            let t = self.t;
            let row = self.actor.step(&self.agent, t < self.cfg.warmup, &schema)?;
            self.replay.real.push(&row);
            if let Some(s) = &self.synther {
                if (t + 1).is_multiple_of(s.real_per_round) {
                    let round = self.rounds.len() as u64;
                    let log = match generation_round(&mut self.gen, &self.replay, s, &self.seeds, round)? {
                        Ok((final_loss, rows)) => {
                            self.replay.synthetic.extend_from_rows(rows.as_slice());
                            self.fallback = false;
                            RoundLog { env_step: t + 1, final_loss, generated: rows.count(), fallback: None }
                        }
                        Err(message) => {
                            self.fallback = true;
                            RoundLog { env_step: t + 1, final_loss: None, generated: 0, fallback: Some(message) }
                        }
                    };
                    self.rounds.push(log);
                }
                let r = if self.fallback || self.replay.synthetic.is_empty() { 1.0 } else { s.ratio };
                self.replay.set_ratio(r)?;
            }
            if t >= self.cfg.warmup {
                for _ in 0..self.agent_cfg.utd {
                    let batch = self.replay.mixed_sample(self.agent_cfg.batch_size, &mut self.sampler)?;
                    sac_step(&mut self.agent, &Batch::from_rows(&schema, batch.as_slice()), &mut self.meter)?;
                }
            }
            self.t += 1;
            if self.t.is_multiple_of(self.cfg.eval_every) {
                record_eval(self.kind, &self.agent, &self.cfg, self.seeds.eval, self.t, &mut self.meter, &mut self.trace)?;
            }
        }
        Ok(())
    }

    pub fn finish(self) -> OnlineResult {
        OnlineResult {
            agent: self.agent,
            trace: self.trace,
            rounds: self.rounds,
        }
    }
}

/// Online SAC whose batches mix real and diffusion-generated transitions.
///
/// Every `real_per_round` environment steps the diffusion model is fine-tuned
/// on the whole real buffer and `synth_per_round` rows are pushed into the
/// synthetic ring buffer. Batches use the real ratio `r` once synthetic data
/// exists and real data only before that or after a failed round. With
/// `synther = None` the loop is plain SAC.
pub fn online_synther_train(
    kind: EnvKind,
    agent_cfg: &AgentConfig,
    cfg: &OnlineConfig,
    synther: Option<&SyntherOnlineConfig>,
    seed: u64,
) -> Result<OnlineResult> {
    let mut session = OnlineSession::new(kind, agent_cfg, cfg, synther, seed)?;
    session.advance(cfg.total_steps)?;
    Ok(session.finish())
}
