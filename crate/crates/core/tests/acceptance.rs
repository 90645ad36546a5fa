//! End-to-end acceptance checks at desk scale. Each test prints one
//! `acceptance <name>: PASS|FAIL (...)` line and then asserts.
//!
//! Run alone with `cargo test --release -p synther --test acceptance -- --nocapture`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use synther::agents::{
    encode_policy, evaluate_policy, offline_train, online_synther_train, sac_train, AgentConfig, OfflineConfig,
    OnlineConfig, OnlineSession, SyntherOnlineConfig,
};
use synther::augment::{upsample_with_augmentation, AugmentationScheme};
use synther::config::RunConfig;
use synther::data::{Normalizer, TransitionDataset, TransitionSchema};
use synther::edm::{generate, run_chain, sigma_schedule, train, DenoiserConfig, DiffusionModel, EdmConfig, GaussianDenoiser};
use synther::envs::{collect_dataset, BehaviorPolicy, EnvKind, EnvOracle, RandomPolicy};
use synther::metrics::{dynamics_mse, median, min_l2_distances, CompressionReport, CorrelationKind, MetricReport, NeighborMode};
use synther::nn::{grad_check, NetShape, ResidualMlp};
use synther::pipeline::{self, Command};
use synther::rng;

// Pinned tolerances.
const GRAD_REL_TOL: f64 = 1e-4;
const GAUSS_MEAN_TOL: f64 = 0.05;
const GAUSS_COV_TOL: f64 = 0.08;
const FIDELITY_MIN: f64 = 0.95;
const PARITY_MIN: f64 = 0.9;
const EFFICIENCY_MAX: f64 = 0.5;

// Desk-scale budgets.
const DATASET_ROWS: usize = 50_000;
const BEHAVIOR_STEPS: usize = 4_000;
const BEHAVIOR_EPSILON: f64 = 0.3;
const DIFFUSION_STEPS: usize = 30_000;
const SMALL_DIFFUSION_STEPS: usize = 5_000;
const SAMPLER_STEPS: usize = 32;
const PARITY_OFFLINE_STEPS: usize = 40_000;
const SMALL_OFFLINE_STEPS: usize = 40_000;
const OFFLINE_EVAL_EPISODES: usize = 20;
const AGENT_SEEDS: u64 = 4;
const BASELINE_STEPS: usize = 30_000;

/// Writes to the raw stderr handle so the line shows without `--nocapture`.
fn report(name: &str, pass: bool, detail: String, started: Instant) {
    let line = format!(
        "acceptance {name}: {} ({detail}; {:.0}s)\n",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn desk_agent() -> AgentConfig {
    AgentConfig {
        width: 64,
        ..AgentConfig::default()
    }
}

fn denoiser() -> DenoiserConfig {
    DenoiserConfig {
        width: 128,
        depth: 2,
        rff_dim: 16,
    }
}

/// Generator for the full point-mass dataset; the 5K-row subsample and the
/// per-round online model use the smaller one.
fn offline_denoiser() -> DenoiserConfig {
    DenoiserConfig {
        width: 256,
        depth: 3,
        rff_dim: 16,
    }
}

/// Generated rows are clamped to the training range.
fn fit_model(data: &TransitionDataset, den: DenoiserConfig, train_steps: usize, seed: u64) -> DiffusionModel {
    let cfg = EdmConfig {
        train_steps,
        steps: SAMPLER_STEPS,
        clamp: true,
        ..EdmConfig::default()
    };
    let mut m = DiffusionModel::new(data.schema(), Normalizer::fit(data).unwrap(), den, cfg, seed).unwrap();
    train(&mut m, data, rng::derive_seed(seed, 1)).unwrap();
    m
}

struct PointMassData {
    real: TransitionDataset,
    held_out: TransitionDataset,
    random_return: f64,
}

/// Mixed-policy point-mass data: a briefly trained SAC actor with ε-random actions.
fn pointmass() -> &'static PointMassData {
    static DATA: OnceLock<PointMassData> = OnceLock::new();
    DATA.get_or_init(|| {
        let kind = EnvKind::PointMass;
        let oc = OnlineConfig {
            total_steps: BEHAVIOR_STEPS,
            eval_every: BEHAVIOR_STEPS,
            ..OnlineConfig::default()
        };
        let behavior = sac_train(kind, &desk_agent(), &oc, 0).unwrap();
        let policy = BehaviorPolicy::Mixed {
            policy: Some(&behavior.agent.actor),
            epsilon: BEHAVIOR_EPSILON,
        };
        let random = RandomPolicy { spec: kind.spec() };
        PointMassData {
            real: collect_dataset(kind, &policy, DATASET_ROWS, 1).unwrap(),
            held_out: collect_dataset(kind, &policy, DATASET_ROWS, 2).unwrap(),
            random_return: evaluate_policy(kind, &random, OFFLINE_EVAL_EPISODES, 0).unwrap().mean,
        }
    })
}

fn pointmass_model() -> &'static DiffusionModel {
    static MODEL: OnceLock<DiffusionModel> = OnceLock::new();
    MODEL.get_or_init(|| fit_model(&pointmass().real, offline_denoiser(), DIFFUSION_STEPS, 3))
}

/// Seed-mean final evaluation return of TD3+BC trained on `data`.
fn offline_return(data: &TransitionDataset, steps: usize) -> (f64, Vec<f64>) {
    let oc = OfflineConfig {
        steps,
        eval_every: steps,
        eval_episodes: OFFLINE_EVAL_EPISODES,
    };
    let returns: Vec<f64> = (0..AGENT_SEEDS)
        .map(|s| {
            let (_, trace) = offline_train(EnvKind::PointMass, &desk_agent(), data, &oc, 100 + s).unwrap();
            trace.last().unwrap().mean_return
        })
        .collect();
    (returns.iter().sum::<f64>() / returns.len() as f64, returns)
}

fn fmt(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.1}")).collect::<Vec<_>>().join(" ")
}

#[test]
fn gradient_check() {
    let t = Instant::now();
    let shape = NetShape {
        in_dim: 12,
        out_dim: 12,
        width: 64,
        depth: 2,
        rff_dim: 16,
    };
    let mut r = rng::seeded(1);
    let net = ResidualMlp::<f64>::new(shape, &mut r).unwrap();
    let x: Vec<f64> = (0..8 * 12).map(|_| r.sample(StandardNormal)).collect();
    let c_noise: Vec<f64> = (0..8).map(|i| -1.5 + 0.4 * i as f64).collect();
    let g = grad_check(&net, &x, Some(&c_noise), 1e-5, 2).unwrap();
    let pass = g.max_rel_error < GRAD_REL_TOL && g.checked == shape.param_count() + x.len();
    report(
        "gradient-check",
        pass,
        format!("max rel err {:.2e} over {} entries, tol {GRAD_REL_TOL:e}", g.max_rel_error, g.checked),
        t,
    );
    assert!(pass);
}

/// Mean and covariance of two columns, in f64.
fn moments2(rows: &[f32], dim: usize) -> ([f64; 2], [f64; 4]) {
    let n = (rows.len() / dim) as f64;
    let mut m = [0.0; 2];
    for row in rows.chunks(dim) {
        m[0] += row[0] as f64 / n;
        m[1] += row[1] as f64 / n;
    }
    let mut c = [0.0; 4];
    for row in rows.chunks(dim) {
        let d = [row[0] as f64 - m[0], row[1] as f64 - m[1]];
        c[0] += d[0] * d[0] / n;
        c[1] += d[0] * d[1] / n;
        c[3] += d[1] * d[1] / n;
    }
    c[2] = c[1];
    (m, c)
}

#[test]
fn gaussian_oracle() {
    let t = Instant::now();
    // The target occupies the first two columns; the rest is independent
    // standard-normal filler because rows have at least four columns.
    let schema = TransitionSchema::new(1, 1, false).unwrap();
    let mut r = rng::seeded(7);
    let l21 = 0.8;
    let l22 = (1.0f64 - 0.8 * 0.8).sqrt();
    let mut rows = Vec::with_capacity(100_000 * 4);
    for _ in 0..100_000 {
        let (z1, z2): (f64, f64) = (r.sample(StandardNormal), r.sample(StandardNormal));
        let (f1, f2): (f32, f32) = (r.sample(StandardNormal), r.sample(StandardNormal));
        rows.extend([(1.0 + z1) as f32, (-1.0 + l21 * z1 + l22 * z2) as f32, f1, f2]);
    }
    let data = TransitionDataset::new(schema, rows).unwrap();
    let cfg = EdmConfig {
        train_steps: 20_000,
        ..EdmConfig::default()
    };
    let mut model = DiffusionModel::new(schema, Normalizer::fit(&data).unwrap(), denoiser(), cfg, 8).unwrap();
    train(&mut model, &data, 9).unwrap();
    let synth = generate(&model, 50_000, 10).unwrap();
    let (m, c) = moments2(synth.as_slice(), 4);
    let mean_err = (m[0] - 1.0).abs().max((m[1] + 1.0).abs());
    let truth = [1.0, 0.8, 0.8, 1.0];
    let cov_err = c.iter().zip(truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let pass = mean_err <= GAUSS_MEAN_TOL && cov_err <= GAUSS_COV_TOL;
    report(
        "gaussian-oracle",
        pass,
        format!(
            "mean ({:.3}, {:.3}) err {mean_err:.3} tol {GAUSS_MEAN_TOL}; cov [{:.3} {:.3}; {:.3} {:.3}] err {cov_err:.3} tol {GAUSS_COV_TOL}",
            m[0], m[1], c[0], c[1], c[2], c[3]
        ),
        t,
    );
    assert!(pass);
}

fn sqrt2x2(m: [f64; 4]) -> [f64; 4] {
    let s = (m[0] * m[3] - m[1] * m[2]).sqrt();
    let t = (m[0] + m[3] + 2.0 * s).sqrt();
    [(m[0] + s) / t, m[1] / t, m[2] / t, (m[3] + s) / t]
}

fn inv2x2(m: [f64; 4]) -> [f64; 4] {
    let det = m[0] * m[3] - m[1] * m[2];
    [m[3] / det, -m[1] / det, -m[2] / det, m[0] / det]
}

fn mul2x2(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

/// V-statistic energy distance between two 2-D samples.
fn energy_distance(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let mean_dist = |x: &[[f64; 2]], y: &[[f64; 2]]| {
        let mut s = 0.0;
        for p in x {
            for q in y {
                s += ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
            }
        }
        s / (x.len() * y.len()) as f64
    };
    2.0 * mean_dist(a, b) - mean_dist(a, a) - mean_dist(b, b)
}

#[test]
fn sampler_order() {
    let t = Instant::now();
    let mean = [1.0, -1.0];
    let cov = [1.0, 0.8, 0.8, 1.0];
    let den = GaussianDenoiser::new(mean.to_vec(), cov.to_vec()).unwrap();
    let n = 2_000;
    let base = EdmConfig {
        s_churn: 0.0,
        ..EdmConfig::default()
    };
    let mut r = rng::seeded(11);
    let start: Vec<f64> = (0..2 * n).map(|_| base.sigma_max * r.sample::<f64, _>(StandardNormal)).collect();
    // Reference: the exact probability-flow transport of the same starting
    // points from σ_max to 0, i.e. μ + Σ^½ (Σ + σ_max² I)^-½ (x − μ).
    let s2 = base.sigma_max * base.sigma_max;
    let map = mul2x2(sqrt2x2(cov), inv2x2(sqrt2x2([cov[0] + s2, cov[1], cov[2], cov[3] + s2])));
    let reference: Vec<[f64; 2]> = start
        .chunks(2)
        .map(|x| {
            let d = [x[0] - mean[0], x[1] - mean[1]];
            [mean[0] + map[0] * d[0] + map[1] * d[1], mean[1] + map[2] * d[0] + map[3] * d[1]]
        })
        .collect();
    let mut distances = Vec::new();
    for steps in [16, 32, 64] {
        let cfg = EdmConfig { steps, ..base.clone() };
        let mut x = start.clone();
        let mut rngs: Vec<_> = (0..n as u64).map(|i| rng::stream(12, i)).collect();
        run_chain(&den, &mut x, &sigma_schedule(&cfg), &cfg, &mut rngs).unwrap();
        let pts: Vec<[f64; 2]> = x.chunks(2).map(|p| [p[0], p[1]]).collect();
        distances.push(energy_distance(&pts, &reference));
    }
    let pass = distances.windows(2).all(|w| w[1] < w[0]);
    report(
        "sampler-order",
        pass,
        format!(
            "energy distance N=16 {:.3e}, N=32 {:.3e}, N=64 {:.3e}",
            distances[0], distances[1], distances[2]
        ),
        t,
    );
    assert!(pass);
}

#[test]
fn fidelity_scores() {
    let t = Instant::now();
    let d = pointmass();
    let synth = generate(pointmass_model(), DATASET_ROWS, 5).unwrap();
    let m = MetricReport::compute(&d.held_out, &synth, CorrelationKind::Pearson, 100_000, 6).unwrap();
    let pass = m.marginal >= FIDELITY_MIN && m.correlation >= FIDELITY_MIN;
    report(
        "fidelity-scores",
        pass,
        format!("marginal {:.4}, correlation {:.4}, min {FIDELITY_MIN}", m.marginal, m.correlation),
        t,
    );
    assert!(pass);
}

#[test]
fn diversity_vs_dynamics() {
    let t = Instant::now();
    let d = pointmass();
    let n = 10_000;
    let synth = generate(pointmass_model(), n, 7).unwrap();
    let up = upsample_with_augmentation(&d.real, &AugmentationScheme::ADDITIVE, d.real.count() + n, 8).unwrap();
    let aug = up.split_at(d.real.count()).1;
    let norm = Normalizer::fit(&d.real).unwrap();
    let oracle: &dyn EnvOracle = EnvKind::PointMass.oracle();
    let stats = |x: &TransitionDataset| {
        let l2 = min_l2_distances(x, &d.real, &norm, NeighborMode::Exact).unwrap();
        let dyn_ = dynamics_mse(x, oracle).unwrap();
        (median(&l2).unwrap(), dyn_.median().unwrap())
    };
    let (syn_l2, syn_mse) = stats(&synth);
    let (aug_l2, aug_mse) = stats(&aug);
    let fresh = d.held_out.take_random(n, 9);
    let (fresh_l2, _) = stats(&fresh);
    let pass = syn_mse < aug_mse && syn_l2 >= aug_l2;
    report(
        "diversity-vs-dynamics",
        pass,
        format!(
            "median dynamics mse synthetic {syn_mse:.5} vs additive {aug_mse:.5}; median min-L2 synthetic {syn_l2:.3} vs additive {aug_l2:.3} (fresh real rows {fresh_l2:.3})"
        ),
        t,
    );
    assert!(pass);
}

#[test]
fn offline_parity() {
    let t = Instant::now();
    let d = pointmass();
    let synth = generate(pointmass_model(), 10 * DATASET_ROWS, 10).unwrap();
    let (real, real_runs) = offline_return(&d.real, PARITY_OFFLINE_STEPS);
    let (syn, syn_runs) = offline_return(&synth, PARITY_OFFLINE_STEPS);
    let ratio = (syn - d.random_return) / (real - d.random_return);
    let pass = ratio >= PARITY_MIN;
    report(
        "offline-parity",
        pass,
        format!(
            "normalized ratio {ratio:.3} (min {PARITY_MIN}); real {real:.1} [{}], synthetic {syn:.1} [{}], random {:.1}",
            fmt(&real_runs),
            fmt(&syn_runs),
            d.random_return
        ),
        t,
    );
    assert!(pass);
}

#[test]
fn small_data_upsampling() {
    let t = Instant::now();
    let d = pointmass();
    let small = d.real.subsample(0.1, 12).unwrap();
    let model = fit_model(&small, denoiser(), SMALL_DIFFUSION_STEPS, 13);
    let synther = small.concat(&generate(&model, DATASET_ROWS - small.count(), 14).unwrap()).unwrap();
    let additive = upsample_with_augmentation(&small, &AugmentationScheme::ADDITIVE, DATASET_ROWS, 15).unwrap();
    let (syn, syn_runs) = offline_return(&synther, SMALL_OFFLINE_STEPS);
    let (aug, aug_runs) = offline_return(&additive, SMALL_OFFLINE_STEPS);
    let pass = syn > aug;
    report(
        "small-data-upsampling",
        pass,
        format!(
            "{} real rows; synthetic-upsampled {syn:.1} [{}] vs additive-upsampled {aug:.1} [{}]",
            small.count(),
            fmt(&syn_runs),
            fmt(&aug_runs)
        ),
        t,
    );
    assert!(pass);
}

fn seed_mean_curve(traces: &[Vec<synther::agents::EvalPoint>]) -> Vec<(usize, f64)> {
    let len = traces.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|i| {
            let m = traces.iter().map(|t| t[i].mean_return).sum::<f64>() / traces.len() as f64;
            (traces[0][i].step, m)
        })
        .collect()
}

#[test]
fn online_sample_efficiency() {
    let t = Instant::now();
    let kind = EnvKind::Pendulum;
    let eval_every = 1_000;
    let baseline_cfg = OnlineConfig {
        total_steps: BASELINE_STEPS,
        eval_every,
        ..OnlineConfig::default()
    };
    let baseline: Vec<_> = (0..AGENT_SEEDS)
        .map(|s| sac_train(kind, &desk_agent(), &baseline_cfg, 200 + s).unwrap().trace)
        .collect();
    let curve = seed_mean_curve(&baseline);
    let threshold = curve.last().unwrap().1;
    let baseline_steps = curve.iter().find(|(_, m)| *m >= threshold).unwrap().0;
    let budget = (EFFICIENCY_MAX * baseline_steps as f64) as usize;

    let agent = AgentConfig {
        utd: 20,
        ..desk_agent()
    };
    let synther = SyntherOnlineConfig {
        ratio: 0.5,
        real_per_round: 1_000,
        synth_per_round: 20_000,
        diffusion_steps_per_round: 2_000,
        synthetic_capacity: 1_000_000,
        denoiser: denoiser(),
        edm: EdmConfig {
            steps: SAMPLER_STEPS,
            ..EdmConfig::default()
        },
    };
    let cfg = OnlineConfig {
        total_steps: budget.max(eval_every),
        eval_every,
        ..OnlineConfig::default()
    };
    let mut sessions: Vec<_> = (0..AGENT_SEEDS)
        .map(|s| OnlineSession::new(kind, &agent, &cfg, Some(&synther), 200 + s).unwrap())
        .collect();
    let mut reached = None;
    while reached.is_none() && !sessions[0].is_finished() {
        for s in &mut sessions {
            s.advance(eval_every).unwrap();
        }
        let traces: Vec<_> = sessions.iter().map(|s| s.trace().to_vec()).collect();
        if let Some(&(step, _)) = seed_mean_curve(&traces).last().filter(|(_, m)| *m >= threshold) {
            reached = Some(step);
        }
    }
    let last = seed_mean_curve(&sessions.iter().map(|s| s.trace().to_vec()).collect::<Vec<_>>());
    let pass = reached.is_some_and(|s| s as f64 <= EFFICIENCY_MAX * baseline_steps as f64);
    let near = last.iter().find(|(_, m)| *m >= threshold - 0.05 * threshold.abs()).map(|p| p.0);
    report(
        "online-sample-efficiency",
        pass,
        format!(
            "threshold {threshold:.1}; plain SAC first reaches it at {baseline_steps} steps; SAC+synthetic reached it at {}, came within 5% at {} (budget {budget}, last seed-mean {:.1})",
            reached.map_or("never".to_string(), |s| s.to_string()),
            near.map_or("never".to_string(), |s| s.to_string()),
            last.last().map_or(f64::NAN, |p| p.1)
        ),
        t,
    );
    assert!(pass);
}

#[test]
fn compression_table() {
    let t = Instant::now();
    let got: Vec<String> = [12.6e6, 42e6, 84e6]
        .iter()
        .map(|&f| CompressionReport::new(f, 6.5e6).unwrap().formatted())
        .collect();
    let pass = got == ["1.9×", "6.5×", "12.9×"];
    report("compression-table", pass, got.join(", "), t);
    assert!(pass);
}

const TINY: &str = "
collect.count = 1500
denoiser.width = 32
denoiser.depth = 2
edm.train_steps = 200
edm.steps = 8
edm.log_every = 50
generate.count = 2000
metrics.scatter_rows = 500
augment.target = 3000
agent.width = 32
agent.batch_size = 64
offline.steps = 200
offline.eval_every = 100
offline.eval_episodes = 2
online.total_steps = 500
online.warmup = 100
online.eval_every = 250
online.eval_episodes = 2
synther.real_per_round = 200
synther.synth_per_round = 1000
synther.diffusion_steps_per_round = 50
synther.synthetic_capacity = 4000
";

fn run_all(base: &Path) -> Vec<PathBuf> {
    let go = |cmd: Command, extra: &[(&str, String)]| {
        let mut cfg = RunConfig::from_text(TINY).unwrap();
        for (k, v) in extra {
            cfg.set(k, v.clone()).unwrap();
        }
        let dir = pipeline::run_dir(base, cmd, &cfg);
        pipeline::run(cmd, &cfg, &dir).unwrap().dir
    };
    let collect = go(Command::Collect, &[]);
    let data = collect.join("dataset.bin").display().to_string();
    let model_dir = go(Command::DiffusionTrain, &[("input.data", data.clone())]);
    let model = model_dir.join("model.bin").display().to_string();
    let gen = go(Command::Generate, &[("input.model", model.clone())]);
    let synth = gen.join("synthetic.bin").display().to_string();
    let metrics = go(
        Command::Metrics,
        &[("input.real", data.clone()), ("input.synth", synth.clone()), ("input.model", model.clone())],
    );
    let aug = go(Command::Augment, &[("input.data", data.clone())]);
    let off = go(Command::Offline, &[("input.data", synth)]);
    let on = go(Command::Online, &[("env.name", "pendulum".into())]);
    let rep = go(
        Command::Report,
        &[
            ("report.runs", off.display().to_string()),
            ("report.datasets", data),
            ("input.model", model),
        ],
    );
    vec![collect, model_dir, gen, metrics, aug, off, on, rep]
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn determinism() {
    let t = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let base = tmp.path().join("runs");
    let first = tmp.path().join("first");
    let a = run_all(&base);
    fs::rename(&base, &first).unwrap();
    let b = run_all(&base);
    let mut mismatched = Vec::new();
    let mut files = 0;
    for dir in &b {
        let name = dir.file_name().unwrap();
        let (x, y) = (dir_bytes(&first.join(name)), dir_bytes(dir));
        files += y.len();
        if x != y {
            mismatched.push(name.to_string_lossy().into_owned());
        }
    }
    let pass = a == b && mismatched.is_empty();
    report(
        "determinism",
        pass,
        format!("{} pipelines, {files} files compared, mismatched: [{}]", b.len(), mismatched.join(", ")),
        t,
    );
    assert!(pass);
}

#[test]
fn baseline_equivalence() {
    let t = Instant::now();
    let mut identical = true;
    let mut details = Vec::new();
    for kind in EnvKind::ALL {
        let cfg = OnlineConfig {
            total_steps: 3_000,
            warmup: 500,
            eval_every: 500,
            eval_episodes: 3,
            buffer_capacity: None,
        };
        let plain = sac_train(kind, &desk_agent(), &cfg, 31).unwrap();
        let loop_ = online_synther_train(kind, &desk_agent(), &cfg, None, 31).unwrap();
        let same = plain.trace == loop_.trace
            && encode_policy(&plain.agent.actor) == encode_policy(&loop_.agent.actor)
            && loop_.rounds.is_empty();
        identical &= same;
        details.push(format!("{}: {}", kind.name(), if same { "identical" } else { "differs" }));
    }
    report("baseline-equivalence", identical, details.join(", "), t);
    assert!(identical);
}
