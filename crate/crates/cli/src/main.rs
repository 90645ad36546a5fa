//! `synther` — runs one pipeline stage per invocation.
//!
//! Every run lands in `<out>/<command>-<config hash>/` together with the fully
//! resolved config. Failures print a single `error kind=... message="..."`
//! line on stderr and exit nonzero.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use synther::config::RunConfig;
use synther::pipeline::{self, Command};

#[derive(Parser, Debug)]
#[command(name = "synther", version, about = "Diffusion-based synthetic experience replay")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug)]
struct Common {
    /// key=value config file ("#" starts a comment)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Base directory for run directories
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Roll out a behaviour policy and save the transitions
    Collect {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        env: Option<String>,
        /// random | mixed | expert
        #[arg(long)]
        policy: Option<String>,
        /// Policy checkpoint for mixed/expert collection
        #[arg(long)]
        checkpoint: Option<String>,
        #[arg(long)]
        count: Option<String>,
        #[arg(long)]
        epsilon: Option<String>,
    },
    /// Train the diffusion model on a dataset
    DiffusionTrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<String>,
    },
    /// Sample synthetic transitions from a trained model
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        count: Option<String>,
        /// Real data to prepend when generate.include_real=true
        #[arg(long)]
        data: Option<String>,
    },
    /// Fidelity scores, min-L2 / dynamics-error scatter, compression
    Metrics {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        real: Option<String>,
        #[arg(long)]
        synth: Option<String>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        env: Option<String>,
    },
    /// Upsample a dataset with a hand-designed augmentation
    Augment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<String>,
        /// additive | multiplicative | dynamics
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long)]
        target: Option<String>,
    },
    /// Train TD3+BC on a fixed dataset
    Offline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<String>,
        #[arg(long)]
        env: Option<String>,
    },
    /// Train SAC online, optionally with a synthetic replay buffer
    Online {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        env: Option<String>,
    },
    /// Compression accounting and run summaries
    Report {
        #[command(flatten)]
        common: Common,
        /// Comma-separated run directories
        #[arg(long)]
        runs: Option<String>,
        /// Comma-separated dataset files
        #[arg(long)]
        datasets: Option<String>,
        /// Comma-separated float counts
        #[arg(long)]
        floats: Option<String>,
        /// Comma-separated parameter counts
        #[arg(long)]
        params: Option<String>,
        #[arg(long)]
        model: Option<String>,
    },
}

type Shortcuts = Vec<(&'static str, Option<String>)>;

impl Cmd {
    fn split(self) -> (Command, Common, Shortcuts) {
        match self {
            Cmd::Collect { common, env, policy, checkpoint, count, epsilon } => (
                Command::Collect,
                common,
                vec![
                    ("env.name", env),
                    ("collect.policy", policy),
                    ("input.policy", checkpoint),
                    ("collect.count", count),
                    ("collect.epsilon", epsilon),
                ],
            ),
            Cmd::DiffusionTrain { common, data } => (Command::DiffusionTrain, common, vec![("input.data", data)]),
            Cmd::Generate { common, model, count, data } => (
                Command::Generate,
                common,
                vec![("input.model", model), ("generate.count", count), ("input.data", data)],
            ),
            Cmd::Metrics { common, real, synth, model, env } => (
                Command::Metrics,
                common,
                vec![("input.real", real), ("input.synth", synth), ("input.model", model), ("env.name", env)],
            ),
            Cmd::Augment { common, data, scheme, target } => (
                Command::Augment,
                common,
                vec![("input.data", data), ("augment.scheme", scheme), ("augment.target", target)],
            ),
            Cmd::Offline { common, data, env } => {
                (Command::Offline, common, vec![("input.data", data), ("env.name", env)])
            }
            Cmd::Online { common, env } => (Command::Online, common, vec![("env.name", env)]),
            Cmd::Report { common, runs, datasets, floats, params, model } => (
                Command::Report,
                common,
                vec![
                    ("report.runs", runs),
                    ("report.datasets", datasets),
                    ("report.floats", floats),
                    ("report.params", params),
                    ("input.model", model),
                ],
            ),
        }
    }
}

/// Pulls `--ns.key=value` / `--ns.key value` overrides out of argv; clap sees
/// the rest.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), synther::Error> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if !name.contains('.') {
            rest.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .ok_or_else(|| synther::Error::Config(format!("--{name} needs a value")))?,
        };
        overrides.push((name, value));
    }
    Ok((rest, overrides))
}

fn set_threads() -> Result<()> {
    let Ok(v) = std::env::var("SYNTHER_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| synther::Error::Config(format!("SYNTHER_THREADS={v:?}: expected a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the thread pool")?;
    Ok(())
}

fn unix_secs() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn resolve(common: &Common, shortcuts: Shortcuts, overrides: Vec<(String, String)>) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| synther::Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        cfg.merge_text(&text)
            .with_context(|| format!("in config {}", path.display()))?;
    }
    if let Some(seed) = common.seed {
        cfg.set("seed", seed.to_string())?;
    }
    for (k, v) in shortcuts {
        if let Some(v) = v {
            cfg.set(k, v)?;
        }
    }
    for (k, v) in overrides {
        cfg.set(&k, v)?;
    }
    Ok(cfg)
}

fn execute(args: Vec<String>) -> Result<()> {
    let (rest, overrides) = split_overrides(args)?;
    let cli = Cli::try_parse_from(rest)?;
    set_threads()?;
    let (command, common, shortcuts) = cli.command.split();
    let cfg = resolve(&common, shortcuts, overrides)?;
    let dir = pipeline::run_dir(&common.out, command, &cfg);
    let started = unix_secs();
    let clock = Instant::now();
    let outcome = pipeline::run(command, &cfg, &dir);
    write_log(&dir, command, started, clock.elapsed().as_secs_f64(), outcome.as_ref().err());
    let outcome = outcome?;
    println!("run_dir={}", outcome.dir.display());
    print!("{}", outcome.summary);
    Ok(())
}

/// Timestamps live only here so every other file is reproducible.
fn write_log(dir: &Path, command: Command, started: f64, elapsed: f64, err: Option<&synther::Error>) {
    let status = match err {
        None => "ok".to_string(),
        Some(e) => format!("failed ({e})"),
    };
    let text = format!(
        "command={}\nstarted_unix={started:.3}\nelapsed_secs={elapsed:.3}\nstatus={status}\n",
        command.name()
    );
    if dir.is_dir() {
        let _ = std::fs::write(dir.join("run.log"), text);
    }
}

/// `(kind, exit code)` of an error chain.
fn classify(err: &anyhow::Error) -> (&'static str, u8) {
    if let Some(e) = err.downcast_ref::<synther::Error>() {
        let code = if matches!(e, synther::Error::Config(_)) { 2 } else { 1 };
        return (e.kind(), code);
    }
    if err.downcast_ref::<clap::Error>().is_some() {
        return ("usage", 2);
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<synther::Error>() {
            let code = if matches!(e, synther::Error::Config(_)) { 2 } else { 1 };
            return (e.kind(), code);
        }
    }
    ("internal", 1)
}

fn main() -> ExitCode {
    match execute(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if let Some(c) = err.downcast_ref::<clap::Error>() {
                use clap::error::ErrorKind;
                if matches!(c.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                    let _ = c.print();
                    return ExitCode::SUCCESS;
                }
            }
            let (kind, code) = classify(&err);
            let message = format!("{err:#}").split_whitespace().collect::<Vec<_>>().join(" ");
            eprintln!("error kind={kind} message={message:?}");
            ExitCode::from(code)
        }
    }
}
