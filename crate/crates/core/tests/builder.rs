use ttpeel_core::linalg::{mat_from_row_major, orthonormality_defect};
use ttpeel_core::{
    predicted_stage_actions, predicted_uniform_actions, random_tt, relative_error, relative_error_entries,
    tt_from_actions, tt_svd, ActionOracle, BuildConfig, CoreError, DenseTensor, HilbertTensor, RankSpec, Shape,
    TensorAction, TensorTrain, Tolerance, Truncation,
};

fn rebuild(truth: &TensorTrain, ranks: Vec<usize>, seed: u64) -> (TensorTrain, ttpeel_core::BuildReport, u64) {
    let oracle = ActionOracle::new(truth);
    let config = BuildConfig::fixed(ranks, seed);
    let (tt, report) = tt_from_actions(&oracle, &config).unwrap();
    (tt, report, oracle.calls())
}

#[test]
fn synthetic_exact_rank_rebuild() {
    let shape = Shape::new(vec![6, 7, 8, 6]).unwrap();
    let truth = random_tt(&shape, &[3, 4, 3], 11).unwrap();
    let (tt, report, calls) = rebuild(&truth, vec![3, 4, 3], 5);
    let err = relative_error(&truth.to_dense().unwrap(), &tt.to_dense().unwrap()).unwrap();
    assert!(err < 1e-8, "error {err}");
    assert_eq!(report.predicted_actions, calls);
    assert_eq!(report.total_actions(), calls);
    for k in 0..3 {
        assert!(tt.core(k).orthonormality_defect() < 1e-10);
    }
}

#[test]
fn exact_recovery_over_seeds() {
    let shape = Shape::new(vec![8, 8, 8, 8]).unwrap();
    for seed in 0..20 {
        let truth = random_tt(&shape, &[4, 3, 4], 100 + seed).unwrap();
        let (tt, _, _) = rebuild(&truth, vec![4, 3, 4], seed);
        let err = relative_error_entries(&tt, |i| truth.entry(i)).unwrap();
        assert!(err < 1e-6, "seed {seed}: error {err}");
    }
}

#[test]
fn matrix_case_is_randomized_svd() {
    let shape = Shape::new(vec![12, 9]).unwrap();
    let truth = random_tt(&shape, &[3], 2).unwrap();
    let (tt, report, calls) = rebuild(&truth, vec![3], 4);
    let err = relative_error(&truth.to_dense().unwrap(), &tt.to_dense().unwrap()).unwrap();
    assert!(err < 1e-10);
    assert_eq!(calls, (3 + 5) + 3);
    assert_eq!(report.predicted_actions, predicted_uniform_actions(2, 3, 5));
}

#[test]
fn first_core_spans_rank_one_factor() {
    let a: Vec<f64> = (0..7).map(|i| (i as f64 + 1.0).sqrt()).collect();
    let b: Vec<f64> = (0..5).map(|i| 1.0 - 0.3 * i as f64).collect();
    let c: Vec<f64> = (0..4).map(|i| (i as f64).cos()).collect();
    let shape = Shape::new(vec![7, 5, 4]).unwrap();
    let t = DenseTensor::from_fn(shape, |i| a[i[0]] * b[i[1]] * c[i[2]]).unwrap();
    let (tt, _) = tt_from_actions(&t, &BuildConfig::uniform(3, 2, 1)).unwrap();
    let norm_a = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let col: Vec<f64> = (0..7).map(|i| tt.core(0).get(0, i, 0)).collect();
    let overlap: f64 = col.iter().zip(&a).map(|(x, y)| x * y).sum::<f64>().abs() / norm_a;
    assert!((overlap - 1.0).abs() < 1e-10);
}

#[test]
fn small_tensor_against_dense_algebra() {
    let shape = Shape::new(vec![3, 4, 3]).unwrap();
    let t = DenseTensor::from_fn(shape, |i| {
        let (x, y, z) = (i[0] as f64, i[1] as f64, i[2] as f64);
        1.0 + x * y - 0.5 * y * z + x * z * z
    })
    .unwrap();
    let (tt, _) = tt_from_actions(&t, &BuildConfig::fixed(vec![3, 3], 9)).unwrap();
    let back = tt.to_dense().unwrap();
    for (x, y) in t.data().iter().zip(back.data()) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn interpolation_identity_holds_post_hoc() {
    let shape = Shape::new(vec![5, 6, 5, 6, 5]).unwrap();
    let truth = random_tt(&shape, &[3, 4, 4, 3], 21).unwrap();
    let (tt, report, _) = rebuild(&truth, vec![3, 4, 4, 3], 3);
    for residual in report.residuals.iter().flatten() {
        assert!(*residual < 1e-8);
    }
    // rebuild the interpolation vectors for core index 3 and check the partial train
    let psi: Vec<f64> = tt.core(0).fiber(0, 0);
    let tau = report.stages[3].tau;
    let r = tt.core(2).right_rank();
    let mut stacked = Vec::new();
    for i in 0..tau {
        let xi = tt.core(1).fiber(0, i);
        stacked.push(tt.partial_open(&[&psi, &xi]).unwrap());
    }
    let interp = ttpeel_core::solve_interpolation(&stacked).unwrap();
    for j in 0..r {
        let mut sum = vec![0.0; r];
        for i in 0..tau {
            let xi = tt.core(1).fiber(0, i);
            let out = tt.partial_apply(&[&psi, &xi, &interp.eta[i][j]]).unwrap();
            for (s, o) in sum.iter_mut().zip(out) {
                *s += o;
            }
        }
        for (l, s) in sum.iter().enumerate() {
            let e = if l == j { 1.0 } else { 0.0 };
            assert!((s - e).abs() < 1e-8);
        }
    }
}

#[test]
fn rank_above_mode_forces_two_fibers() {
    let shape = Shape::new(vec![4, 3, 4, 4]).unwrap();
    let truth = random_tt(&shape, &[4, 5, 4], 6).unwrap();
    let (tt, report, calls) = rebuild(&truth, vec![4, 5, 4], 8);
    assert!(report.stages[2].tau >= 2);
    let err = relative_error(&truth.to_dense().unwrap(), &tt.to_dense().unwrap()).unwrap();
    assert!(err < 1e-8, "error {err}");
    assert_eq!(report.predicted_actions, calls);
}

#[test]
fn counts_match_prediction_for_many_configs() {
    let configs: [(&[usize], &[usize]); 6] = [
        (&[5, 6, 7], &[2, 3]),
        (&[9, 4, 8, 6], &[3, 5, 2]),
        (&[6, 6, 6, 6, 6], &[2, 2, 2, 2]),
        (&[10, 10, 10, 10], &[8, 8, 8]),
        (&[7, 8, 9, 10, 11, 12], &[4, 6, 5, 3, 2]),
        (&[3, 3, 3, 3], &[3, 4, 3]),
    ];
    for (dims, ranks) in configs {
        let shape = Shape::new(dims.to_vec()).unwrap();
        let truth = random_tt(&shape, ranks, 1).unwrap();
        let (_, report, calls) = rebuild(&truth, ranks.to_vec(), 2);
        let predicted: u64 = predicted_stage_actions(dims, &report.ranks, 5, 1).iter().sum();
        assert_eq!(calls, predicted, "dims {dims:?}");
        assert_eq!(report.per_stage_actions, predicted_stage_actions(dims, &report.ranks, 5, 1));
    }
}

#[test]
fn oversized_rank_is_clamped_with_warning() {
    let shape = Shape::new(vec![3, 4, 5]).unwrap();
    let truth = random_tt(&shape, &[2, 2], 1).unwrap();
    let (tt, report, _) = rebuild(&truth, vec![9, 3], 2);
    assert_eq!(tt.ranks()[0], 3);
    assert!(!report.warnings.is_empty());
}

#[test]
fn ranks_below_minimum_are_rejected() {
    let shape = Shape::new(vec![3, 4, 5]).unwrap();
    let truth = random_tt(&shape, &[2, 2], 1).unwrap();
    let err = tt_from_actions(&truth, &BuildConfig::fixed(vec![1, 2], 0)).unwrap_err();
    assert!(matches!(err, CoreError::Config(_)));
    let err = tt_from_actions(&truth, &BuildConfig::fixed(vec![2], 0)).unwrap_err();
    assert!(matches!(err, CoreError::Config(_)));
}

#[test]
fn zero_tensor_error_carries_stage() {
    let shape = Shape::new(vec![3, 4, 5]).unwrap();
    let zero = DenseTensor::zeros(shape).unwrap();
    let err = tt_from_actions(&zero, &BuildConfig::uniform(3, 2, 0)).unwrap_err();
    match err {
        CoreError::Stage { stage, source } => {
            assert_eq!(stage, 1);
            assert!(matches!(*source, CoreError::DegenerateRange));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn seeded_builds_are_identical() {
    let shape = Shape::new(vec![6, 5, 6, 5]).unwrap();
    let truth = random_tt(&shape, &[3, 3, 3], 4).unwrap();
    let a = rebuild(&truth, vec![2, 2, 2], 77).0;
    let b = rebuild(&truth, vec![2, 2, 2], 77).0;
    assert_eq!(a, b);
}

#[test]
fn adaptive_build_finds_true_ranks() {
    let shape = Shape::new(vec![7, 7, 7, 7]).unwrap();
    let truth = random_tt(&shape, &[3, 4, 3], 12).unwrap();
    let config = BuildConfig::adaptive(Tolerance::Relative(1e-9), 7, 3);
    let (tt, report) = tt_from_actions(&truth, &config).unwrap();
    assert_eq!(tt.ranks(), vec![3, 4, 3]);
    assert!(report.warnings.is_empty());
    let err = relative_error(&truth.to_dense().unwrap(), &tt.to_dense().unwrap()).unwrap();
    assert!(err < 1e-8);
    assert!(matches!(config.ranks, RankSpec::Adaptive { .. }));
}

#[test]
fn small_hilbert_is_near_optimal_and_monotone() {
    let shape = Shape::new(vec![11, 12, 13, 14]).unwrap();
    let h = HilbertTensor::new(shape.clone());
    let dense = DenseTensor::from_fn(shape, HilbertTensor::entry).unwrap();
    let mut prev = f64::INFINITY;
    for r in 2..=7 {
        let (tt, _) = tt_from_actions(&h, &BuildConfig::uniform(4, r, 1)).unwrap();
        let err = relative_error(&dense, &tt.to_dense().unwrap()).unwrap();
        let svd = tt_svd(&dense, &Truncation::Ranks(vec![r; 3])).unwrap();
        let best = relative_error(&dense, &svd.to_dense().unwrap()).unwrap();
        assert!(err <= 10.0 * best, "rank {r}: {err} vs {best}");
        assert!(err <= prev + 1e-14, "rank {r}: {err} after {prev}");
        prev = err;
    }
}

#[test]
fn action_oracle_counts_dispatches() {
    let shape = Shape::new(vec![3, 3, 3]).unwrap();
    let h = HilbertTensor::new(shape);
    let oracle = ActionOracle::new(&h);
    let x = [1.0, 0.0, 0.0];
    oracle.act(0, &[&x, &x]).unwrap();
    oracle.act(2, &[&x, &x]).unwrap();
    assert_eq!(oracle.calls(), 2);
    let m = mat_from_row_major(2, 2, &[1.0, 0.0, 0.0, 1.0]);
    assert!(orthonormality_defect(m.as_ref()) < 1e-15);
}
