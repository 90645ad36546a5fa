use std::path::Path;

use crate::bytes::{ByteReader, ByteWriter};
use crate::envs::{EnvSpec, Policy};
use crate::error::{Error, Result};
use crate::nn::checkpoint::{read_network, write_network};
use crate::nn::ResidualMlp;
use crate::rng::Rng;

pub const POLICY_MAGIC: &[u8; 8] = b"SYNTHP1\0";

pub(crate) const LOG_STD_MIN: f64 = -5.0;
pub(crate) const LOG_STD_MAX: f64 = 2.0;

/// How the actor's raw output becomes an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyHead {
    /// `scale · tanh(out)`.
    Deterministic,
    /// Mean and log-std; the deterministic action is `scale · tanh(mean)`.
    SquashedGaussian,
}

/// An actor network with its observation normalization and action scale.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    pub head: PolicyHead,
    pub net: ResidualMlp<f32>,
    pub action_scale: f32,
    pub obs_mean: Vec<f32>,
    pub obs_std: Vec<f32>,
}

impl PolicyNet {
    pub fn state_dim(&self) -> usize {
        self.obs_mean.len()
    }

    pub fn action_dim(&self) -> usize {
        match self.head {
            PolicyHead::Deterministic => self.net.shape().out_dim,
            PolicyHead::SquashedGaussian => self.net.shape().out_dim / 2,
        }
    }

    pub fn normalize(&self, states: &[f32]) -> Vec<f32> {
        let d = self.state_dim();
        states
            .iter()
            .enumerate()
            .map(|(k, &v)| (v - self.obs_mean[k % d]) / self.obs_std[k % d])
            .collect()
    }

    /// Deterministic actions for a batch of raw states.
    pub fn act_batch(&self, states: &[f32]) -> Result<Vec<f32>> {
        let out = self.net.predict(&self.normalize(states), None)?;
        let ad = self.action_dim();
        let w = self.net.shape().out_dim;
        Ok(out
            .chunks_exact(w)
            .flat_map(|r| r[..ad].iter().map(|&u| self.action_scale * u.tanh()))
            .collect())
    }

    pub fn check_env(&self, spec: &EnvSpec) -> Result<()> {
        if self.state_dim() != spec.state_dim || self.action_dim() != spec.action_dim {
            return Err(Error::Config(format!(
                "policy ({} states, {} actions) does not fit environment {} ({} states, {} actions)",
                self.state_dim(),
                self.action_dim(),
                spec.name,
                spec.state_dim,
                spec.action_dim
            )));
        }
        Ok(())
    }
}

impl Policy for PolicyNet {
    fn act(&self, obs: &[f32], _rng: &mut Rng) -> Vec<f32> {
        self.act_batch(obs).expect("observation matches the policy input")
    }
}

pub fn encode_policy(p: &PolicyNet) -> Vec<u8> {
    let mut w = ByteWriter::default();
    w.bytes(POLICY_MAGIC);
    w.u8(match p.head {
        PolicyHead::Deterministic => 0,
        PolicyHead::SquashedGaussian => 1,
    });
    w.f32s(&[p.action_scale]);
    w.u32(p.obs_mean.len() as u32);
    w.f32s(&p.obs_mean);
    w.f32s(&p.obs_std);
    write_network(&p.net, &mut w);
    w.buf
}

pub fn decode_policy(bytes: &[u8]) -> Result<PolicyNet> {
    let mut r = ByteReader::new(bytes);
    r.magic(POLICY_MAGIC)?;
    let at = r.offset();
    let head = match r.u8("policy head")? {
        0 => PolicyHead::Deterministic,
        1 => PolicyHead::SquashedGaussian,
        k => return Err(Error::format(at, format!("unknown policy head {k}"))),
    };
    let action_scale = r.f32s(1, "action scale")?[0];
    let sd = r.u32("state dim")? as usize;
    let obs_mean = r.f32s(sd, "observation mean")?;
    let obs_std = r.f32s(sd, "observation std")?;
    let at = r.offset();
    let net = read_network(&mut r)?;
    r.finish()?;
    let p = PolicyNet { head, net, action_scale, obs_mean, obs_std };
    let s = p.net.shape();
    let out_ok = match head {
        PolicyHead::Deterministic => true,
        PolicyHead::SquashedGaussian => s.out_dim.is_multiple_of(2),
    };
    if s.in_dim != sd || s.rff_dim != 0 || !out_ok {
        return Err(Error::format(at, "actor network shape does not match the policy header"));
    }
    Ok(p)
}

pub fn save_policy(p: &PolicyNet, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_policy(p))?;
    Ok(())
}

pub fn load_policy(path: impl AsRef<Path>) -> Result<PolicyNet> {
    decode_policy(&std::fs::read(path)?)
}
