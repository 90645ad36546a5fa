use synther::agents::*;
use synther::data::TransitionDataset;
use synther::envs::{collect_dataset, BehaviorPolicy, EnvKind, RandomPolicy};
use synther::nn::Adam;

fn small() -> AgentConfig {
    AgentConfig { width: 32, batch_size: 64, ..AgentConfig::default() }
}

fn dataset(kind: EnvKind, n: usize, seed: u64) -> TransitionDataset {
    collect_dataset(kind, &BehaviorPolicy::Random, n, seed).unwrap()
}

fn batch_of(d: &TransitionDataset, n: usize) -> Batch {
    Batch::from_rows(&d.schema(), &d.as_slice()[..n * d.row_dim()])
}

fn all_terminal(d: &TransitionDataset, n: usize) -> Batch {
    let mut b = batch_of(d, n);
    b.dones.iter_mut().for_each(|x| *x = 1.0);
    b
}

#[test]
fn terminal_rows_bootstrap_nothing() {
    let d = dataset(EnvKind::PointMass, 200, 0);
    let b = all_terminal(&d, 64);
    let spec = EnvKind::PointMass.spec();
    let mut td3 = Td3Bc::for_dataset(&spec, &small(), &d, 1).unwrap();
    let mut sac = Sac::new(&spec, &small(), 2).unwrap();
    let want: Vec<f64> = b.rewards.iter().map(|&r| f64::from(r)).collect();
    assert_eq!(td3.critic_targets(&b).unwrap(), want);
    assert_eq!(sac.critic_targets(&b).unwrap(), want);
}

#[test]
fn target_arithmetic() {
    assert_eq!(td_target(1.5, 1.0, 0.99, 1e6), 1.5);
    assert_eq!(td_target(1.0, 0.0, 0.5, 4.0), 3.0);
    // zero temperature drops the entropy bonus
    assert_eq!(Sac::soft_target(1.0, 0.0, 0.5, 4.0, 0.0, -7.0), 3.0);
    assert_eq!(Sac::soft_target(1.0, 0.0, 0.5, 4.0, 0.1, -10.0), 3.5);
    assert!((Td3Bc::bc_lambda(2.5, 5.0) - 0.5).abs() < 1e-6);
}

#[test]
fn polyak_and_policy_delay() {
    let d = dataset(EnvKind::PointMass, 500, 3);
    let spec = EnvKind::PointMass.spec();
    let cfg = small();
    let mut agent = Td3Bc::for_dataset(&spec, &cfg, &d, 4).unwrap();
    let b = batch_of(&d, 64);
    let a0 = agent.actor.net.params().to_vec();
    let t0 = agent.q1_target.params().to_vec();
    let l1 = agent.update(&b).unwrap();
    assert!(l1.actor.is_none());
    assert_eq!(agent.actor.net.params(), &a0[..]);
    assert_eq!(agent.q1_target.params(), &t0[..]);
    let l2 = agent.update(&b).unwrap();
    assert!(l2.actor.is_some());
    assert_ne!(agent.actor.net.params(), &a0[..]);
    for ((&t, &old), &online) in agent.q1_target.params().iter().zip(&t0).zip(agent.q1.params()) {
        let want = ((1.0 - cfg.tau) * f64::from(old) + cfg.tau * f64::from(online)) as f32;
        assert_eq!(t, want);
    }
    let a2 = agent.actor.net.params().to_vec();
    agent.update(&b).unwrap();
    assert_eq!(agent.actor.net.params(), &a2[..]);
}

#[test]
fn zero_critic_gives_pure_bc_gradient() {
    let d = dataset(EnvKind::PointMass, 300, 5);
    let spec = EnvKind::PointMass.spec();
    let mut agent = Td3Bc::for_dataset(&spec, &small(), &d, 6).unwrap();
    let n_out = agent.q1.named_params().last().unwrap().1.len();
    let w_len = agent.q1.named_params()[agent.q1.named_params().len() - 2].1.len();
    let total = agent.q1.param_count();
    agent.q1.params_mut()[total - n_out - w_len..].iter_mut().for_each(|p| *p = 0.0);
    let b = batch_of(&d, 64);
    let (_, grads, lambda) = agent.actor_gradient(&b).unwrap();
    assert!(lambda.is_finite() && lambda > 1e5);

    // behaviour cloning alone
    let s = agent.actor.normalize(&b.states);
    let (u, cache) = agent.actor.net.forward(&s, None).unwrap();
    let n = b.len as f64;
    let du: Vec<f32> = u
        .iter()
        .zip(&b.actions)
        .map(|(&u, &a)| {
            let t = f64::from(u.tanh());
            (2.0 * (t - f64::from(a)) / n * (1.0 - t * t)) as f32
        })
        .collect();
    let bc = agent.actor.net.backward(&cache, &du).unwrap().params;
    for (g, w) in grads.iter().zip(&bc) {
        assert!((g - w).abs() <= 1e-6 * w.abs().max(1e-3), "{g} vs {w}");
    }
    let mut opt = Adam::<f32>::new(grads.len());
    let mut p = agent.actor.net.params().to_vec();
    opt.step(&mut p, &grads, 3e-4);
    assert_ne!(p, agent.actor.net.params());
}

#[test]
fn temperature_moves_toward_entropy_target() {
    let d = dataset(EnvKind::Pendulum, 300, 7);
    let spec = EnvKind::Pendulum.spec();
    let b = batch_of(&d, 64);
    for (target, should_fall) in [(-50.0, true), (50.0, false)] {
        let cfg = AgentConfig { target_entropy: Some(target), ..small() };
        let mut sac = Sac::new(&spec, &cfg, 8).unwrap();
        let before = sac.temperature();
        let l = sac.update(&b).unwrap();
        assert!(l.entropy.is_finite());
        assert_eq!(sac.temperature() < before, should_fall);
    }
}

#[test]
fn stable_log_jacobian() {
    for u in [-30.0, -3.0, -0.5, 0.0, 0.7, 4.0, 25.0f64] {
        let direct = (1.0 - u.tanh().powi(2)).ln();
        let stable = log_one_minus_tanh_sq(u);
        if direct.is_finite() {
            assert!((direct - stable).abs() < 1e-9 * direct.abs().max(1.0), "{u}");
        }
        assert!(stable.is_finite());
    }
}

#[test]
fn evaluation_is_deterministic_and_offline_training_learns() {
    let kind = EnvKind::PointMass;
    let d = collect_dataset(kind, &BehaviorPolicy::Random, 20_000, 9).unwrap();
    let cfg = OfflineConfig { steps: 3000, eval_every: 1500, eval_episodes: 5 };
    let (agent, trace) = offline_train(kind, &small(), &d, &cfg, 10).unwrap();
    let (_, again) = offline_train(kind, &small(), &d, &cfg, 10).unwrap();
    assert_eq!(trace, again);
    assert_eq!(trace.len(), 2);
    let e1 = evaluate_policy(kind, &agent.actor, 5, 11).unwrap();
    let e2 = evaluate_policy(kind, &agent.actor, 5, 11).unwrap();
    assert_eq!(e1, e2);
    let random = evaluate_policy(kind, &RandomPolicy { spec: kind.spec() }, 5, 11).unwrap();
    assert!(e1.mean > random.mean, "{} vs {}", e1.mean, random.mean);
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, &trace).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("step,mean_return"));
}

#[test]
fn offline_rejects_mismatched_env() {
    let d = dataset(EnvKind::Pendulum, 100, 0);
    let e = offline_train(EnvKind::PointMass, &small(), &d, &OfflineConfig::default(), 0).unwrap_err();
    assert!(matches!(e, synther::Error::Config(m) if m.contains("pendulum") || m.contains("pointmass")));
}

#[test]
fn disabled_generation_matches_plain_sac() {
    let kind = EnvKind::Pendulum;
    let cfg = small();
    let oc = OnlineConfig { total_steps: 1500, warmup: 500, eval_every: 500, eval_episodes: 2, buffer_capacity: None };
    let plain = sac_train(kind, &cfg, &oc, 12).unwrap();
    let mixed = online_synther_train(kind, &cfg, &oc, None, 12).unwrap();
    assert_eq!(plain.trace, mixed.trace);
    assert_eq!(plain.agent.actor, mixed.agent.actor);
    assert_eq!(plain.agent.q1, mixed.agent.q1);
    assert!(mixed.rounds.is_empty());
}

#[test]
fn online_config_errors() {
    let oc = OnlineConfig { total_steps: 10, warmup: 100, ..OnlineConfig::default() };
    assert!(matches!(
        sac_train(EnvKind::Pendulum, &small(), &oc, 0),
        Err(synther::Error::Config(_))
    ));
    let bad = AgentConfig { gamma: 1.0, ..small() };
    assert!(Sac::new(&EnvKind::Pendulum.spec(), &bad, 0).is_err());
}

#[test]
fn policy_checkpoint_roundtrip() {
    let d = dataset(EnvKind::PointMass, 100, 13);
    let agent = Td3Bc::for_dataset(&EnvKind::PointMass.spec(), &small(), &d, 14).unwrap();
    let bytes = encode_policy(&agent.actor);
    assert_eq!(decode_policy(&bytes).unwrap(), agent.actor);
    assert!(decode_policy(&bytes[..bytes.len() - 1]).is_err());
    let sac = Sac::new(&EnvKind::Pendulum.spec(), &small(), 0).unwrap();
    let p = decode_policy(&encode_policy(&sac.actor)).unwrap();
    assert_eq!(p.head, PolicyHead::SquashedGaussian);
    assert_eq!(p.action_dim(), 1);
}
