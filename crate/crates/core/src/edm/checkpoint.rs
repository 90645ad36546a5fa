//! Diffusion model file: the network checkpoint followed by
//!
//! | size | field |
//! |---|---|
//! | 8 | magic `SYNTHE1\0` |
//! | 8 × 11 | σ_min, σ_max, S_churn, S_tmin, S_tmax, S_noise, σ_data, ρ, P_mean, P_std, lr (f64) |
//! | 4 | sampler steps (u32) |
//! | 8 × 4 | train_steps, batch_size (0 = size rule), log_every, chunk_size (u64) |
//! | 1 | clamp flag |
//! | 4 + 4 + 1 | schema: state_dim, action_dim (u32), has_terminal (u8) |
//! | 8 × D × 2 + D | normalizer mean, std (f64) and terminal mask (u8) |
//! | 1 (+ 8 × D) | data-range flag, then per-column min and max (f32) |

use std::fs;
use std::path::Path;

use super::{DiffusionModel, EdmConfig};
use crate::bytes::{ByteReader, ByteWriter};
use crate::data::{Normalizer, TransitionSchema};
use crate::error::{Error, Result};
use crate::nn::checkpoint::{read_network, write_network};

pub const MODEL_MAGIC: &[u8; 8] = b"SYNTHE1\0";

pub fn encode_model(model: &DiffusionModel) -> Vec<u8> {
    let mut w = ByteWriter::default();
    write_network(&model.net, &mut w);
    w.bytes(MODEL_MAGIC);
    let c = &model.config;
    w.f64s(&[
        c.sigma_min, c.sigma_max, c.s_churn, c.s_tmin, c.s_tmax, c.s_noise, c.sigma_data, c.rho,
        c.p_mean, c.p_std, c.lr,
    ]);
    w.u32(c.steps as u32);
    w.u64(c.train_steps as u64);
    w.u64(c.batch_size.unwrap_or(0) as u64);
    w.u64(c.log_every as u64);
    w.u64(c.chunk_size as u64);
    w.u8(u8::from(c.clamp));
    let s = model.schema;
    w.u32(s.state_dim() as u32);
    w.u32(s.action_dim() as u32);
    w.u8(u8::from(s.has_terminal()));
    w.f64s(model.normalizer.mean());
    w.f64s(model.normalizer.std());
    for &m in model.normalizer.terminal_mask() {
        w.u8(u8::from(m));
    }
    match &model.data_range {
        Some((lo, hi)) => {
            w.u8(1);
            w.f32s(lo);
            w.f32s(hi);
        }
        None => w.u8(0),
    }
    w.buf
}

pub fn decode_model(bytes: &[u8]) -> Result<DiffusionModel> {
    let mut r = ByteReader::new(bytes);
    let net = read_network(&mut r)?;
    r.magic(MODEL_MAGIC)?;
    let at = r.offset();
    let f = r.f64s(11, "sampler configuration")?;
    let steps = r.u32("steps")? as usize;
    let train_steps = r.u64("train_steps")? as usize;
    let batch = r.u64("batch_size")? as usize;
    let log_every = r.u64("log_every")? as usize;
    let chunk_size = r.u64("chunk_size")? as usize;
    let clamp = r.u8("clamp")? != 0;
    let config = EdmConfig {
        sigma_min: f[0],
        sigma_max: f[1],
        s_churn: f[2],
        s_tmin: f[3],
        s_tmax: f[4],
        s_noise: f[5],
        sigma_data: f[6],
        rho: f[7],
        p_mean: f[8],
        p_std: f[9],
        lr: f[10],
        steps,
        train_steps,
        batch_size: (batch > 0).then_some(batch),
        log_every,
        chunk_size,
        clamp,
    };
    config.validate().map_err(|e| Error::format(at, e.to_string()))?;

    let schema_at = r.offset();
    let schema = TransitionSchema::new(
        r.u32("state_dim")? as usize,
        r.u32("action_dim")? as usize,
        r.u8("has_terminal")? != 0,
    )
    .map_err(|e| Error::format(schema_at, e.to_string()))?;
    let dim = schema.row_dim();
    if net.shape().in_dim != dim || net.shape().out_dim != dim {
        return Err(Error::format(
            schema_at,
            format!("network width {} does not match schema row_dim {dim}", net.shape().in_dim),
        ));
    }
    let norm_at = r.offset();
    let mean = r.f64s(dim, "normalizer mean")?;
    let std = r.f64s(dim, "normalizer std")?;
    let mask = (0..dim)
        .map(|_| r.u8("terminal mask").map(|b| b != 0))
        .collect::<Result<Vec<_>>>()?;
    let normalizer =
        Normalizer::from_parts(mean, std, mask).map_err(|e| Error::format(norm_at, e.to_string()))?;
    let data_range = match r.u8("data-range flag")? {
        0 => None,
        _ => Some((r.f32s(dim, "column minima")?, r.f32s(dim, "column maxima")?)),
    };
    r.finish()?;
    Ok(DiffusionModel {
        net,
        config,
        normalizer,
        schema,
        data_range,
    })
}

pub fn save_model(model: &DiffusionModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DiffusionModel> {
    decode_model(&fs::read(path)?)
}
