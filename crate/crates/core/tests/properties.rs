use levsketch::crosslev::heavy_pairs;
use levsketch::fixtures;
use levsketch::levscore::approx_leverage;
use levsketch::matcore::{exact_cross_leverage, exact_leverage, qr_thin, DenseMatrix};
use levsketch::rankklev::frobenius_rankk;
use levsketch::sketch::{fwht, SketchPlan};
use levsketch::underls::{draw_sampling_matrix, SamplingProbabilities};
use proptest::prelude::*;

fn matrix(
    rows: std::ops::Range<usize>,
    cols: std::ops::Range<usize>,
) -> impl Strategy<Value = DenseMatrix> {
    (rows, cols).prop_flat_map(|(n, d)| {
        prop::collection::vec(-10.0f64..10.0, n * d)
            .prop_map(move |data| DenseMatrix::new(n, d, data).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn leverage_scores_sum_to_rank(a in matrix(8..40, 1..6)) {
        let r = exact_leverage(&a).unwrap();
        let sum: f64 = r.scores.iter().sum();
        prop_assert!((sum - r.rank as f64).abs() < 1e-9);
        prop_assert!(r.scores.iter().all(|&s| (-1e-12..=1.0 + 1e-12).contains(&s)));
    }

    #[test]
    fn cross_leverage_matrix_is_a_projector(a in matrix(6..24, 1..5)) {
        let p = exact_cross_leverage(&a).unwrap();
        let pp = p.matmul(&p).unwrap();
        prop_assert!(pp.max_abs_diff(&p) < 1e-9);
        prop_assert!(p.transpose().max_abs_diff(&p) < 1e-12);
    }

    #[test]
    fn degenerate_plan_is_exact(a in matrix(10..70, 1..6), seed in any::<u64>()) {
        let (n, d) = a.shape();
        let plan = SketchPlan::degenerate(n, d, 0.5).unwrap();
        let approx = approx_leverage(&a, &plan, seed).unwrap().0.scores;
        let exact = exact_leverage(&a).unwrap().scores;
        for (x, y) in approx.iter().zip(&exact) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn sketched_scores_are_invariant_to_column_scaling(a in matrix(20..60, 2..5), c in 0.01f64..100.0) {
        let (n, d) = a.shape();
        let plan = SketchPlan::practical(n, d, 0.5).unwrap();
        let base = approx_leverage(&a, &plan, 5).unwrap().0.scores;
        let scaled = approx_leverage(&a.scaled(c), &plan, 5).unwrap().0.scores;
        for (x, y) in base.iter().zip(&scaled) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn fwht_is_an_involution(x in prop::collection::vec(-1e3f64..1e3, 64)) {
        let y = fwht(&fwht(&x).unwrap()).unwrap();
        for (a, b) in x.iter().zip(&y) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn heavy_pairs_clear_the_threshold(x in matrix(2..50, 1..6), kappa in 1.5f64..500.0) {
        let set = heavy_pairs(&x, kappa).unwrap();
        prop_assert!(set.pairs.iter().all(|p| p.c_sq >= set.threshold && p.i <= p.j));
        prop_assert!(set.len() as f64 <= kappa * x.cols() as f64);
    }

    #[test]
    fn sampling_weights_match_probabilities(d in 2usize..30, r in 1usize..200, seed in any::<u64>()) {
        let probs = SamplingProbabilities::uniform(d).unwrap();
        let s = draw_sampling_matrix(&probs, r, seed).unwrap();
        prop_assert_eq!(s.selected.len(), r);
        let w = 1.0 / (r as f64 / d as f64).sqrt();
        prop_assert!(s.weights.iter().all(|&v| (v - w).abs() < 1e-12));
        prop_assert!(s.selected.iter().all(|&i| i < d));
    }
}

#[test]
fn unbiased_sampled_gram() {
    // E[(VᵀS)(VᵀS)ᵀ] = I for leverage sampling of orthonormal rows Vᵀ
    let vt = qr_thin(&fixtures::gaussian(64, 3, 2)).unwrap().0.transpose();
    let lev: Vec<f64> = (0..64)
        .map(|j| vt.column(j).iter().map(|v| v * v).sum::<f64>() / 3.0)
        .collect();
    let probs = SamplingProbabilities::new(lev, 1.0).unwrap();
    let trials = 200;
    let mut mean = DenseMatrix::zeros(3, 3);
    let mut sq = DenseMatrix::zeros(3, 3);
    for seed in 0..trials {
        let s = draw_sampling_matrix(&probs, 10, seed).unwrap();
        let vs = s.right_apply(&vt).unwrap();
        let g = vs.matmul_transpose(&vs).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                mean.row_mut(i)[j] += g[(i, j)] / trials as f64;
                sq.row_mut(i)[j] += g[(i, j)].powi(2) / trials as f64;
            }
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            let target = if i == j { 1.0 } else { 0.0 };
            let var = (sq[(i, j)] - mean[(i, j)].powi(2)).max(0.0);
            let se = (var / trials as f64).sqrt();
            assert!(
                (mean[(i, j)] - target).abs() <= 3.0 * se + 1e-12,
                "({i},{j})"
            );
        }
    }
}

#[test]
fn frobenius_scores_are_permutation_equivariant() {
    let a = fixtures::gaussian(30, 30, 3);
    let perm: Vec<usize> = (0..30).map(|i| (i * 7) % 30).collect();
    let p = frobenius_rankk(&a, 3, 0.5, 4).unwrap().p_hat;
    let pp = frobenius_rankk(&a.select_rows(&perm), 3, 0.5, 4)
        .unwrap()
        .p_hat;
    for (i, &src) in perm.iter().enumerate() {
        assert!((pp[i] - p[src]).abs() < 1e-10);
    }
}
