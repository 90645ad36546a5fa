//! Flat `key=value` run configuration with namespaced keys.
//!
//! Every tunable has a default; files and overrides may only set known keys.
//! The resolved configuration is written next to each run's outputs and is
//! enough to reproduce it.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::agents::{AgentConfig, OfflineConfig, OnlineConfig, SyntherOnlineConfig};
use crate::augment::AugmentationScheme;
use crate::edm::{DenoiserConfig, EdmConfig};
use crate::error::{Error, Result};

/// Known keys and their defaults. `auto` defers to a rule documented on the
/// corresponding config struct.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "0"),
    ("env.name", "auto"),
    ("input.data", ""),
    ("input.real", ""),
    ("input.synth", ""),
    ("input.model", ""),
    ("input.policy", ""),
    ("collect.policy", "random"),
    ("collect.epsilon", "0.3"),
    ("collect.count", "50000"),
    ("collect.csv", "false"),
    ("data.fraction", "1"),
    ("data.subsample_seed", "0"),
    ("edm.sigma_min", "0.002"),
    ("edm.sigma_max", "80"),
    ("edm.s_churn", "80"),
    ("edm.s_tmin", "0.05"),
    ("edm.s_tmax", "50"),
    ("edm.s_noise", "1.003"),
    ("edm.steps", "128"),
    ("edm.sigma_data", "1"),
    ("edm.rho", "7"),
    ("edm.p_mean", "-1.2"),
    ("edm.p_std", "1.2"),
    ("edm.train_steps", "100000"),
    ("edm.batch_size", "auto"),
    ("edm.lr", "0.0003"),
    ("edm.log_every", "1000"),
    ("edm.chunk_size", "16384"),
    ("edm.clamp", "false"),
    ("denoiser.width", "1024"),
    ("denoiser.depth", "6"),
    ("denoiser.rff_dim", "16"),
    ("generate.count", "5000000"),
    ("generate.include_real", "false"),
    ("metrics.max_samples", "100000"),
    ("metrics.correlation", "pearson"),
    ("metrics.neighbors", "exact"),
    ("metrics.scatter_rows", "10000"),
    ("augment.scheme", "additive"),
    ("augment.sigma", "0.1"),
    ("augment.low", "auto"),
    ("augment.high", "auto"),
    ("augment.target", "5000000"),
    ("agent.gamma", "0.99"),
    ("agent.tau", "0.005"),
    ("agent.lr", "0.0003"),
    ("agent.layers", "2"),
    ("agent.width", "256"),
    ("agent.batch_size", "256"),
    ("agent.utd", "1"),
    ("agent.bc_alpha", "2.5"),
    ("agent.policy_noise", "0.2"),
    ("agent.noise_clip", "0.5"),
    ("agent.policy_delay", "2"),
    ("agent.init_temperature", "1"),
    ("agent.target_entropy", "auto"),
    ("offline.steps", "100000"),
    ("offline.eval_every", "5000"),
    ("offline.eval_episodes", "10"),
    ("online.total_steps", "100000"),
    ("online.warmup", "1000"),
    ("online.eval_every", "1000"),
    ("online.eval_episodes", "10"),
    ("online.buffer_capacity", "auto"),
    ("synther.enabled", "true"),
    ("synther.ratio", "0.5"),
    ("synther.real_per_round", "1000"),
    ("synther.synth_per_round", "100000"),
    ("synther.diffusion_steps_per_round", "10000"),
    ("synther.synthetic_capacity", "1000000"),
    ("report.runs", ""),
    ("report.datasets", ""),
    ("report.floats", ""),
    ("report.params", ""),
];

/// A fully specified run configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            values: KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are ignored.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got {line:?}", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    pub fn is_known(key: &str) -> bool {
        KEYS.iter().any(|(k, _)| *k == key)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.into();
                Ok(())
            }
            None => Err(Error::Config(format!("unknown config key {key:?}"))),
        }
    }

    /// Applies every pair of a config file; unknown keys are rejected.
    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_pairs(text)? {
            self.set(&k, v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.merge_text(text)?;
        Ok(c)
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("unregistered key {key}"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        let v = self.raw(key);
        v.parse()
            .map_err(|e| Error::Config(format!("{key}={v:?}: {e}")))
    }

    /// `None` when the key is set to `auto`.
    pub fn get_auto<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        if self.raw(key) == "auto" {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    /// `None` when the key is empty.
    pub fn path(&self, key: &str) -> Option<&str> {
        Some(self.raw(key)).filter(|v| !v.is_empty())
    }

    pub fn require_path(&self, key: &str) -> Result<&str> {
        self.path(key)
            .ok_or_else(|| Error::Config(format!("{key} must name an input file")))
    }

    pub fn seed(&self) -> Result<u64> {
        self.get("seed")
    }

    /// Sorted `key=value` lines.
    pub fn resolved_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// SHA-256 of `command` and the resolved text, hex encoded.
    pub fn digest(&self, command: &str) -> String {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(b"\n");
        h.update(self.resolved_text().as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn edm(&self) -> Result<EdmConfig> {
        let c = EdmConfig {
            sigma_min: self.get("edm.sigma_min")?,
            sigma_max: self.get("edm.sigma_max")?,
            s_churn: self.get("edm.s_churn")?,
            s_tmin: self.get("edm.s_tmin")?,
            s_tmax: self.get("edm.s_tmax")?,
            s_noise: self.get("edm.s_noise")?,
            steps: self.get("edm.steps")?,
            sigma_data: self.get("edm.sigma_data")?,
            rho: self.get("edm.rho")?,
            p_mean: self.get("edm.p_mean")?,
            p_std: self.get("edm.p_std")?,
            train_steps: self.get("edm.train_steps")?,
            batch_size: self.get_auto("edm.batch_size")?,
            lr: self.get("edm.lr")?,
            log_every: self.get("edm.log_every")?,
            chunk_size: self.get("edm.chunk_size")?,
            clamp: self.get("edm.clamp")?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn denoiser(&self) -> Result<DenoiserConfig> {
        Ok(DenoiserConfig {
            width: self.get("denoiser.width")?,
            depth: self.get("denoiser.depth")?,
            rff_dim: self.get("denoiser.rff_dim")?,
        })
    }

    pub fn agent(&self) -> Result<AgentConfig> {
        let c = AgentConfig {
            gamma: self.get("agent.gamma")?,
            tau: self.get("agent.tau")?,
            lr: self.get("agent.lr")?,
            layers: self.get("agent.layers")?,
            width: self.get("agent.width")?,
            batch_size: self.get("agent.batch_size")?,
            utd: self.get("agent.utd")?,
            bc_alpha: self.get("agent.bc_alpha")?,
            policy_noise: self.get("agent.policy_noise")?,
            noise_clip: self.get("agent.noise_clip")?,
            policy_delay: self.get("agent.policy_delay")?,
            init_temperature: self.get("agent.init_temperature")?,
            target_entropy: self.get_auto("agent.target_entropy")?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn offline(&self) -> Result<OfflineConfig> {
        Ok(OfflineConfig {
            steps: self.get("offline.steps")?,
            eval_every: self.get("offline.eval_every")?,
            eval_episodes: self.get("offline.eval_episodes")?,
        })
    }

    pub fn online(&self) -> Result<OnlineConfig> {
        Ok(OnlineConfig {
            total_steps: self.get("online.total_steps")?,
            warmup: self.get("online.warmup")?,
            eval_every: self.get("online.eval_every")?,
            eval_episodes: self.get("online.eval_episodes")?,
            buffer_capacity: self.get_auto("online.buffer_capacity")?,
        })
    }

    /// `None` when `synther.enabled=false`.
    pub fn synther(&self) -> Result<Option<SyntherOnlineConfig>> {
        if !self.get::<bool>("synther.enabled")? {
            return Ok(None);
        }
        let c = SyntherOnlineConfig {
            ratio: self.get("synther.ratio")?,
            real_per_round: self.get("synther.real_per_round")?,
            synth_per_round: self.get("synther.synth_per_round")?,
            diffusion_steps_per_round: self.get("synther.diffusion_steps_per_round")?,
            synthetic_capacity: self.get("synther.synthetic_capacity")?,
            denoiser: self.denoiser()?,
            edm: self.edm()?,
        };
        c.validate()?;
        Ok(Some(c))
    }

    pub fn augmentation(&self) -> Result<AugmentationScheme> {
        let base = AugmentationScheme::by_name(self.raw("augment.scheme"))?;
        let s = match base {
            AugmentationScheme::Additive { .. } => AugmentationScheme::Additive { sigma: self.get("augment.sigma")? },
            AugmentationScheme::Multiplicative { low, high } => AugmentationScheme::Multiplicative {
                low: self.get_auto("augment.low")?.unwrap_or(low),
                high: self.get_auto("augment.high")?.unwrap_or(high),
            },
            AugmentationScheme::Dynamics { low, high } => AugmentationScheme::Dynamics {
                low: self.get_auto("augment.low")?.unwrap_or(low),
                high: self.get_auto("augment.high")?.unwrap_or(high),
            },
        };
        s.validate()?;
        Ok(s)
    }
}
