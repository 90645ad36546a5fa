use proptest::prelude::*;
use synther::augment::*;
use synther::data::TransitionDataset;
use synther::envs::{collect_dataset, BehaviorPolicy, EnvKind};
use synther::rng;

fn data(kind: EnvKind, n: usize, seed: u64) -> TransitionDataset {
    collect_dataset(kind, &BehaviorPolicy::Random, n, seed).unwrap()
}

fn fixed_fields(d: &TransitionDataset, row: &[f32]) -> Vec<u32> {
    let s = d.schema();
    let mut v: Vec<u32> = row[s.action_range()].iter().map(|x| x.to_bits()).collect();
    v.push(row[s.reward_index()].to_bits());
    if let Some(t) = s.terminal_index() {
        v.push(row[t].to_bits());
    }
    v
}

#[test]
fn additive_noise_std() {
    let d = data(EnvKind::PointMass, 1, 0);
    let schema = d.schema();
    let base = d.row(0).to_vec();
    let mut r = rng::seeded(1);
    let n = 100_000;
    let mut sums = vec![(0.0f64, 0.0f64); schema.row_dim()];
    for _ in 0..n {
        let mut row = base.clone();
        augment_row(&schema, &mut row, &AugmentationScheme::ADDITIVE, &mut r);
        for (j, (s, q)) in sums.iter_mut().enumerate() {
            let e = f64::from(row[j]) - f64::from(base[j]);
            *s += e;
            *q += e * e;
        }
    }
    for j in schema.state_range().chain(schema.next_state_range()) {
        let (s, q) = sums[j];
        let std = (q / n as f64 - (s / n as f64).powi(2)).sqrt();
        assert!((std - 0.1).abs() < 0.002, "dim {j}: {std}");
    }
}

#[test]
fn unit_dynamics_scale_is_identity() {
    let d = data(EnvKind::Pendulum, 2000, 2);
    let id = AugmentationScheme::Dynamics { low: 1.0, high: 1.0 };
    let up = upsample_with_augmentation(&d, &id, 6000, 3).unwrap();
    let originals: std::collections::HashSet<Vec<u32>> =
        d.rows().map(|r| r.iter().map(|x| x.to_bits()).collect()).collect();
    for row in up.rows() {
        assert!(originals.contains(&row.iter().map(|x| x.to_bits()).collect::<Vec<_>>()));
    }
}

#[test]
fn upsample_counts_and_errors() {
    let d = data(EnvKind::PointMass, 500, 4);
    let same = upsample_with_augmentation(&d, &AugmentationScheme::ADDITIVE, 500, 0).unwrap();
    assert_eq!(same, d);
    let up = upsample_with_augmentation(&d, &AugmentationScheme::ADDITIVE, 1000, 0).unwrap();
    assert_eq!(up.count(), 1000);
    assert_eq!(up.split_at(500).0, d);
    assert!(matches!(
        upsample_with_augmentation(&d, &AugmentationScheme::ADDITIVE, 499, 0),
        Err(synther::Error::InvalidInput(_))
    ));
    let again = upsample_with_augmentation(&d, &AugmentationScheme::ADDITIVE, 1000, 0).unwrap();
    assert_eq!(up, again);
}

#[test]
fn upsample_is_thread_count_independent() {
    let d = data(EnvKind::PointMass, 300, 5);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| upsample_with_augmentation(&d, &AugmentationScheme::MULTIPLICATIVE, 3000, 6).unwrap())
    };
    assert_eq!(run(1), run(4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn action_reward_terminal_are_preserved(seed in 0u64..500, which in 0usize..3, pendulum in any::<bool>()) {
        let kind = if pendulum { EnvKind::Pendulum } else { EnvKind::PointMass };
        let d = data(kind, 50, seed);
        let scheme = [AugmentationScheme::ADDITIVE, AugmentationScheme::MULTIPLICATIVE, AugmentationScheme::DYNAMICS][which];
        let mut r = rng::seeded(seed);
        for row in d.rows() {
            let mut out = row.to_vec();
            augment_row(&d.schema(), &mut out, &scheme, &mut r);
            prop_assert_eq!(fixed_fields(&d, row), fixed_fields(&d, &out));
        }
    }
}
