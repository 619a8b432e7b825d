use msmda::data::{normalize, NormKind};
use msmda::losses::{alpha_schedule, discrepancy_loss, mmd_squared, KernelSpec};
use msmda::model::{ModelConfig, MsMdaModel};
use msmda::neuralcore::{softmax, Matrix};
use msmda::oracle::mmd_brute_force;
use proptest::prelude::*;

fn matrix(rows: std::ops::RangeInclusive<usize>, cols: usize) -> impl Strategy<Value = Matrix> {
    rows.prop_flat_map(move |r| {
        prop::collection::vec(-3.0f64..3.0, r * cols)
            .prop_map(move |v| Matrix::new(r, cols, v).unwrap())
    })
}

fn kernel() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        Just(KernelSpec::default()),
        (0.1f64..4.0).prop_map(|bandwidth| KernelSpec::RbfFixed { bandwidth }),
        Just(KernelSpec::Linear),
    ]
}

fn pair() -> impl Strategy<Value = (Matrix, Matrix)> {
    (1usize..=6).prop_flat_map(|d| (matrix(2..=20, d), matrix(2..=20, d)))
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.iter_rows().map(|r| r.to_vec()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mmd_is_nonnegative_symmetric_and_zero_on_self((s, t) in pair(), k in kernel()) {
        let st = mmd_squared(&s, &t, &k).unwrap().value;
        let ts = mmd_squared(&t, &s, &k).unwrap().value;
        prop_assert!(st >= 0.0);
        prop_assert!((st - ts).abs() <= 1e-12 * st.abs().max(1.0));
        prop_assert!(mmd_squared(&s, &s, &k).unwrap().value <= 1e-12);
    }

    #[test]
    fn mmd_matches_brute_force((s, t) in pair(), k in kernel()) {
        let fast = mmd_squared(&s, &t, &k).unwrap().value;
        let slow = mmd_brute_force(&rows(&s), &rows(&t), &k);
        prop_assert!((fast - slow.max(0.0)).abs() <= 1e-10 * slow.abs().max(1e-12), "{fast} vs {slow}");
    }

    #[test]
    fn discrepancy_is_permutation_invariant(ms in prop::collection::vec(matrix(3..=3, 4), 2..5), rot in 0usize..5) {
        let probs: Vec<Matrix> = ms.iter().map(softmax).collect();
        let mut rotated = probs.clone();
        rotated.rotate_left(rot % probs.len());
        let (a, _) = discrepancy_loss(&probs).unwrap();
        let (b, _) = discrepancy_loss(&rotated).unwrap();
        prop_assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn normalization_is_idempotent(m in matrix(2..=12, 5)) {
        for kind in [NormKind::ElectrodeWise, NormKind::SampleWise, NormKind::GlobalWise] {
            let once = normalize(&m, kind);
            prop_assert!(once.max_abs_diff(&normalize(&once, kind)).unwrap() < 1e-10);
        }
    }

    #[test]
    fn alpha_is_monotone(e in 1usize..400) {
        prop_assert_eq!(alpha_schedule(0, e).unwrap(), 0.0);
        for i in 0..e {
            prop_assert!(alpha_schedule(i + 1, e).unwrap() >= alpha_schedule(i, e).unwrap());
        }
    }

    #[test]
    fn checkpoint_round_trip_is_exact(seed in any::<u64>(), branches in 1usize..4) {
        let model = MsMdaModel::new(ModelConfig {
            input_dim: 7,
            cfe_dims: vec![5, 4],
            dsfe_dim: 3,
            num_classes: 2,
            num_branches: branches,
            leaky_slope: 0.01,
            rng_seed: seed,
        }).unwrap();
        let bytes = model.to_checkpoint_bytes();
        let back = MsMdaModel::from_checkpoint_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_checkpoint_bytes(), bytes);
    }
}
