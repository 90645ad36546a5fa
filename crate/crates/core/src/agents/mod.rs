//! TD3+BC and SAC agents, policy evaluation, and the offline and online
//! SynthER training loops.

mod config;
mod eval;
mod nets;
mod offline;
mod online;
mod policy;
mod sac;
mod td3bc;

pub use config::AgentConfig;
pub use eval::{evaluate_policy, write_trace_csv, EvalPoint, EvalResult, DEFAULT_EVAL_EPISODES};
pub use nets::{polyak, td_target, Batch};
pub use offline::{check_dataset_env, offline_train, OfflineConfig};
pub use online::{
    online_synther_train, sac_train, OnlineConfig, OnlineResult, OnlineSession, RoundLog, SyntherOnlineConfig,
};
pub use policy::{decode_policy, encode_policy, load_policy, save_policy, PolicyHead, PolicyNet, POLICY_MAGIC};
pub use sac::{log_one_minus_tanh_sq, Sac, SacLosses};
pub use td3bc::{state_moments, Td3Bc, Td3BcLosses, LAMBDA_EPS, OBS_STD_EPS};
