//! The end-to-end commands behind the CLI. Each writes its outputs into a run
//! directory; everything written here is a pure function of the resolved
//! configuration and the input files.

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::agents::{
    check_dataset_env, load_policy, offline_train, online_synther_train, save_policy, write_trace_csv, EvalPoint,
    RoundLog,
};
use crate::augment::upsample_with_augmentation;
use crate::config::RunConfig;
use crate::data::{export_csv, load_dataset, save_dataset, Normalizer, TransitionDataset, TransitionSchema};
use crate::edm::{generate, load_model, save_model, train, DiffusionModel, LossPoint};
use crate::envs::{collect_dataset, BehaviorPolicy, EnvKind};
use crate::error::{Error, Result};
use crate::metrics::{
    dynamics_mse, median, min_l2_distances, write_scatter_csv, CompressionReport, CorrelationKind, MetricReport,
    NeighborMode,
};
use crate::rng::derive_seed;

pub const RESOLVED_CONFIG_FILE: &str = "config.resolved";
pub const SEED_FILE: &str = "seed";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Collect,
    DiffusionTrain,
    Generate,
    Metrics,
    Augment,
    Offline,
    Online,
    Report,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Collect,
        Command::DiffusionTrain,
        Command::Generate,
        Command::Metrics,
        Command::Augment,
        Command::Offline,
        Command::Online,
        Command::Report,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Collect => "collect",
            Command::DiffusionTrain => "diffusion-train",
            Command::Generate => "generate",
            Command::Metrics => "metrics",
            Command::Augment => "augment",
            Command::Offline => "offline",
            Command::Online => "online",
            Command::Report => "report",
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown command {name:?}")))
    }
}

/// `base/<command>-<first 16 hex digits of the config digest>`.
pub fn run_dir(base: &Path, command: Command, cfg: &RunConfig) -> PathBuf {
    base.join(format!("{}-{}", command.name(), &cfg.digest(command.name())[..16]))
}

/// Files written by a run plus its `key=value` summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub summary: String,
}

struct Out<'a> {
    dir: &'a Path,
    files: Vec<String>,
    summary: String,
}

impl<'a> Out<'a> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.summary, "{key}={value}");
    }

    fn csv(&mut self, name: &str, f: impl FnOnce(BufWriter<fs::File>) -> Result<()>) -> Result<()> {
        let file = fs::File::create(self.path(name))?;
        f(BufWriter::new(file))
    }
}

/// Runs `command` into `dir` (created if needed). Writes the resolved config
/// and seed first so a failed run still records what was attempted.
pub fn run(command: Command, cfg: &RunConfig, dir: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(dir)?;
    let mut out = Out {
        dir,
        files: Vec::new(),
        summary: String::new(),
    };
    fs::write(out.path(RESOLVED_CONFIG_FILE), cfg.resolved_text())?;
    fs::write(out.path(SEED_FILE), format!("{}\n", cfg.seed()?))?;
    match command {
        Command::Collect => collect(cfg, &mut out)?,
        Command::DiffusionTrain => diffusion_train(cfg, &mut out)?,
        Command::Generate => generate_cmd(cfg, &mut out)?,
        Command::Metrics => metrics(cfg, &mut out)?,
        Command::Augment => augment(cfg, &mut out)?,
        Command::Offline => offline(cfg, &mut out)?,
        Command::Online => online(cfg, &mut out)?,
        Command::Report => report(cfg, &mut out)?,
    }
    let summary = out.summary.clone();
    fs::write(out.path(SUMMARY_FILE), &summary)?;
    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        files: out.files,
        summary,
    })
}

/// `env.name`, or the environment whose schema matches when it is `auto`
/// (point mass if there is no data to go by).
pub fn resolve_env(cfg: &RunConfig, schema: Option<&TransitionSchema>) -> Result<EnvKind> {
    let name = cfg.raw("env.name");
    if name == "auto" {
        return match schema {
            None => Ok(EnvKind::PointMass),
            Some(s) => EnvKind::for_schema(s)
                .ok_or_else(|| Error::Config(format!("no environment matches dataset schema {s:?}; set env.name"))),
        };
    }
    EnvKind::by_name(name)
}

/// Loads `key`'s dataset and applies `data.fraction` subsampling.
fn load_input(cfg: &RunConfig, key: &str) -> Result<TransitionDataset> {
    let d = load_dataset(cfg.require_path(key)?)?;
    let fraction: f64 = cfg.get("data.fraction")?;
    if fraction >= 1.0 {
        return Ok(d);
    }
    d.subsample(fraction, cfg.get("data.subsample_seed")?)
}

fn check_model_data(model: &DiffusionModel, data: &TransitionDataset) -> Result<()> {
    if model.schema() != data.schema() {
        return Err(Error::Config(format!(
            "dataset schema {:?} does not match model schema {:?}",
            data.schema(),
            model.schema()
        )));
    }
    Ok(())
}

fn collect(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let kind = resolve_env(cfg, None)?;
    let seed = cfg.seed()?;
    let loaded = cfg.path("input.policy").map(load_policy).transpose()?;
    if let Some(p) = &loaded {
        p.check_env(&kind.spec())?;
    }
    let policy = loaded.as_ref().map(|p| p as &dyn crate::envs::Policy);
    let behavior = match cfg.raw("collect.policy") {
        "random" => BehaviorPolicy::Random,
        "mixed" => BehaviorPolicy::Mixed {
            policy,
            epsilon: cfg.get("collect.epsilon")?,
        },
        "expert" => BehaviorPolicy::Expert { policy },
        other => return Err(Error::Config(format!("collect.policy={other:?}: expected random|mixed|expert"))),
    };
    let data = collect_dataset(kind, &behavior, cfg.get("collect.count")?, derive_seed(seed, 1))?;
    save_dataset(&data, out.path("dataset.bin"))?;
    if cfg.get::<bool>("collect.csv")? {
        export_csv(&data, out.path("dataset.csv"))?;
    }
    out.note("env", kind.name());
    out.note("rows", data.count());
    if let Some(t) = data.schema().terminal_index() {
        out.note("terminals", data.rows().filter(|r| r[t] > 0.5).count());
    }
    let r = data.schema().reward_index();
    out.note("mean_reward", data.rows().map(|row| row[r] as f64).sum::<f64>() / data.count().max(1) as f64);
    Ok(())
}

fn write_loss_csv(w: impl std::io::Write, trace: &[LossPoint]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["step", "loss"])?;
    for p in trace {
        csv.write_record([p.step.to_string(), p.loss.to_string()])?;
    }
    csv.flush()?;
    Ok(())
}

fn diffusion_train(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let data = load_input(cfg, "input.data")?;
    let seed = cfg.seed()?;
    let mut model = DiffusionModel::new(
        data.schema(),
        Normalizer::fit(&data)?,
        cfg.denoiser()?,
        cfg.edm()?,
        derive_seed(seed, 1),
    )?;
    let trace = train(&mut model, &data, derive_seed(seed, 2))?;
    save_model(&model, out.path("model.bin"))?;
    out.csv("loss.csv", |w| write_loss_csv(w, &trace))?;
    out.note("rows", data.count());
    out.note("params", model.param_count());
    if let Some(last) = trace.last() {
        out.note("final_loss", last.loss);
    }
    out.note("compression", CompressionReport::for_dataset(&data, model.param_count())?.formatted());
    Ok(())
}

fn generate_cmd(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let mut model = load_model(cfg.require_path("input.model")?)?;
    // Sampler settings may be changed after training.
    let trained = model.config().clone();
    *model.config_mut() = crate::edm::EdmConfig {
        train_steps: trained.train_steps,
        batch_size: trained.batch_size,
        lr: trained.lr,
        log_every: trained.log_every,
        p_mean: trained.p_mean,
        p_std: trained.p_std,
        sigma_data: trained.sigma_data,
        ..cfg.edm()?
    };
    let count: usize = cfg.get("generate.count")?;
    let synth = generate(&model, count, derive_seed(cfg.seed()?, 1))?;
    let data = if cfg.get::<bool>("generate.include_real")? {
        let real = load_input(cfg, "input.data")?;
        check_model_data(&model, &real)?;
        real.concat(&synth)?
    } else {
        synth
    };
    save_dataset(&data, out.path("synthetic.bin"))?;
    out.note("generated", count);
    out.note("rows", data.count());
    Ok(())
}

fn metrics(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let real = load_dataset(cfg.require_path("input.real")?)?;
    let synth = load_dataset(cfg.require_path("input.synth")?)?;
    if real.schema() != synth.schema() {
        return Err(Error::Config(format!(
            "real schema {:?} does not match synthetic schema {:?}",
            real.schema(),
            synth.schema()
        )));
    }
    let seed = cfg.seed()?;
    let kind = CorrelationKind::by_name(cfg.raw("metrics.correlation"))?;
    let report = MetricReport::compute(&real, &synth, kind, cfg.get("metrics.max_samples")?, derive_seed(seed, 1))?;
    out.csv("metrics.csv", |w| report.write_csv(w))?;
    out.summary.push_str(&report.summary());

    let scatter_rows: usize = cfg.get("metrics.scatter_rows")?;
    if scatter_rows > 0 {
        let env = resolve_env(cfg, Some(&real.schema()))?;
        if env.spec().schema() != real.schema() {
            return Err(Error::Config(format!(
                "dataset schema {:?} does not match environment {} schema {:?}",
                real.schema(),
                env.name(),
                env.spec().schema()
            )));
        }
        let rows = synth.take_random(scatter_rows.min(synth.count()), derive_seed(seed, 2));
        let mode = match cfg.raw("metrics.neighbors") {
            "exact" => NeighborMode::Exact,
            n => NeighborMode::Subsampled {
                rows: n
                    .parse()
                    .map_err(|_| Error::Config(format!("metrics.neighbors={n:?}: expected exact or a row count")))?,
                seed: derive_seed(seed, 3),
            },
        };
        let distances = min_l2_distances(&rows, &real, &Normalizer::fit(&real)?, mode)?;
        let dynamics = dynamics_mse(&rows, env.oracle())?;
        out.csv("scatter.csv", |w| write_scatter_csv(w, &distances, &dynamics))?;
        out.note("median_min_l2", median(&distances).unwrap_or(f64::NAN));
        out.note("median_dynamics_mse", dynamics.median().unwrap_or(f64::NAN));
        out.note("dynamics_excluded", dynamics.excluded);
    }
    if let Some(path) = cfg.path("input.model") {
        let model = load_model(path)?;
        check_model_data(&model, &real)?;
        out.note("compression", CompressionReport::for_dataset(&real, model.param_count())?.formatted());
    }
    Ok(())
}

fn augment(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let data = load_input(cfg, "input.data")?;
    let scheme = cfg.augmentation()?;
    let up = upsample_with_augmentation(&data, &scheme, cfg.get("augment.target")?, derive_seed(cfg.seed()?, 1))?;
    save_dataset(&up, out.path("augmented.bin"))?;
    out.note("scheme", scheme.name());
    out.note("rows", up.count());
    Ok(())
}

fn note_final(out: &mut Out, trace: &[EvalPoint]) {
    if let Some(p) = trace.last() {
        out.note("final_step", p.step);
        out.note("final_mean_return", p.mean_return);
        out.note("final_std_return", p.std_return);
    }
}

fn offline(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let data = load_input(cfg, "input.data")?;
    let kind = resolve_env(cfg, Some(&data.schema()))?;
    check_dataset_env(&data, kind)?;
    let (agent, trace) = offline_train(kind, &cfg.agent()?, &data, &cfg.offline()?, cfg.seed()?)?;
    out.csv("trace.csv", |w| write_trace_csv(w, &trace))?;
    save_policy(&agent.actor, out.path("policy.bin"))?;
    out.note("env", kind.name());
    out.note("rows", data.count());
    note_final(out, &trace);
    Ok(())
}

fn write_rounds_csv(w: impl std::io::Write, rounds: &[RoundLog]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["env_step", "final_loss", "generated", "fallback"])?;
    for r in rounds {
        csv.write_record([
            r.env_step.to_string(),
            r.final_loss.map(|l| l.to_string()).unwrap_or_default(),
            r.generated.to_string(),
            r.fallback.clone().unwrap_or_default(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

fn online(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let kind = resolve_env(cfg, None)?;
    let synther = cfg.synther()?;
    let result = online_synther_train(kind, &cfg.agent()?, &cfg.online()?, synther.as_ref(), cfg.seed()?)?;
    out.csv("trace.csv", |w| write_trace_csv(w, &result.trace))?;
    if synther.is_some() {
        out.csv("rounds.csv", |w| write_rounds_csv(w, &result.rounds))?;
        out.note("rounds", result.rounds.len());
        out.note("fallbacks", result.rounds.iter().filter(|r| r.fallback.is_some()).count());
    }
    save_policy(&result.agent.actor, out.path("policy.bin"))?;
    out.note("env", kind.name());
    note_final(out, &result.trace);
    Ok(())
}

fn list(cfg: &RunConfig, key: &str) -> Vec<String> {
    cfg.raw(key)
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn list_f64(cfg: &RunConfig, key: &str) -> Result<Vec<f64>> {
    list(cfg, key)
        .iter()
        .map(|v| v.parse().map_err(|e| Error::Config(format!("{key}: {v:?}: {e}"))))
        .collect()
}

/// Reads the last row of a run's `trace.csv` as `(step, mean_return, std)`.
fn final_eval(run: &Path) -> Result<(String, String, String)> {
    let path = run.join("trace.csv");
    let mut rdr = csv::Reader::from_path(&path)
        .map_err(|e| Error::UnavailableData(format!("{}: {e}", path.display())))?;
    let last = rdr
        .records()
        .last()
        .ok_or_else(|| Error::UnavailableData(format!("{}: empty trace", path.display())))??;
    Ok((last[0].to_string(), last[1].to_string(), last[2].to_string()))
}

fn report(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    // Compression accounting: explicit float counts and/or dataset files
    // against explicit parameter counts and/or a model file.
    let mut floats: Vec<(String, f64)> = list_f64(cfg, "report.floats")?
        .into_iter()
        .map(|f| (format!("{f}"), f))
        .collect();
    for path in list(cfg, "report.datasets") {
        let d = load_dataset(&path)?;
        floats.push((path, (d.count() * d.row_dim()) as f64));
    }
    let mut params: Vec<(String, f64)> = list_f64(cfg, "report.params")?
        .into_iter()
        .map(|p| (format!("{p}"), p))
        .collect();
    if let Some(path) = cfg.path("input.model") {
        params.push((path.to_string(), load_model(path)?.param_count() as f64));
    }
    if !floats.is_empty() {
        if params.is_empty() {
            return Err(Error::Config("compression report needs report.params or input.model".into()));
        }
        let mut rows = Vec::new();
        for (fname, f) in &floats {
            for (pname, p) in &params {
                rows.push((fname.clone(), pname.clone(), *f, *p, CompressionReport::new(*f, *p)?));
            }
        }
        out.csv("compression.csv", |w| {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(["data", "model", "floats", "params", "ratio", "formatted"])?;
            for (fname, pname, f, p, c) in &rows {
                csv.write_record([
                    fname.clone(),
                    pname.clone(),
                    f.to_string(),
                    p.to_string(),
                    c.ratio.to_string(),
                    c.formatted(),
                ])?;
            }
            csv.flush()?;
            Ok(())
        })?;
        out.note("compression", rows.iter().map(|r| r.4.formatted()).collect::<Vec<_>>().join(","));
    }

    let runs = list(cfg, "report.runs");
    if !runs.is_empty() {
        let mut rows = Vec::new();
        for run in &runs {
            let (step, mean, std) = final_eval(Path::new(run))?;
            rows.push([run.clone(), step, mean, std]);
        }
        out.csv("runs.csv", |w| {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(["run", "final_step", "final_mean_return", "final_std_return"])?;
            for r in &rows {
                csv.write_record(r)?;
            }
            csv.flush()?;
            Ok(())
        })?;
        out.note("runs", rows.len());
    }
    if floats.is_empty() && runs.is_empty() {
        return Err(Error::Config(
            "report needs report.floats, report.datasets or report.runs".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_names_roundtrip() {
        for c in Command::ALL {
            assert_eq!(Command::by_name(c.name()).unwrap(), c);
        }
        assert!(Command::by_name("train").is_err());
    }

    #[test]
    fn env_resolution() {
        let mut cfg = RunConfig::default();
        assert_eq!(resolve_env(&cfg, None).unwrap(), EnvKind::PointMass);
        let pend = EnvKind::Pendulum.spec().schema();
        assert_eq!(resolve_env(&cfg, Some(&pend)).unwrap(), EnvKind::Pendulum);
        let odd = TransitionSchema::new(7, 1, false).unwrap();
        assert!(matches!(resolve_env(&cfg, Some(&odd)), Err(Error::Config(_))));
        cfg.set("env.name", "pendulum").unwrap();
        assert_eq!(resolve_env(&cfg, None).unwrap(), EnvKind::Pendulum);
    }
}
