//! Collect point-mass data, fit a small diffusion model, upsample, score.
//!
//! `cargo run --release -p synther --example quickstart`

use synther::data::Normalizer;
use synther::edm::{generate, train, DenoiserConfig, DiffusionModel, EdmConfig};
use synther::envs::{collect_dataset, BehaviorPolicy, EnvKind};
use synther::metrics::{CompressionReport, CorrelationKind, MetricReport};

fn main() -> synther::Result<()> {
    let real = collect_dataset(EnvKind::PointMass, &BehaviorPolicy::Random, 20_000, 0)?;
    let cfg = EdmConfig {
        train_steps: 3_000,
        steps: 32,
        ..EdmConfig::default()
    };
    let den = DenoiserConfig {
        width: 128,
        depth: 2,
        rff_dim: 16,
    };
    let mut model = DiffusionModel::new(real.schema(), Normalizer::fit(&real)?, den, cfg, 1)?;
    let losses = train(&mut model, &real, 2)?;
    println!("final loss {:.4}", losses.last().map_or(f64::NAN, |p| p.loss));

    let synth = generate(&model, 100_000, 3)?;
    let m = MetricReport::compute(&real, &synth, CorrelationKind::Pearson, 100_000, 4)?;
    println!("marginal {:.3}  correlation {:.3}", m.marginal, m.correlation);
    let c = CompressionReport::for_dataset(&real, model.param_count())?;
    println!("{} params, compression {}", model.param_count(), c.formatted());
    Ok(())
}
