mod support;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rcurc::model::{
    core_rank, cur_exact_check, gen_low_rank, gen_sparse_outliers, incoherence_mu, sparsity_alpha,
    SyntheticProblem,
};
use rcurc::sampling::sample_unique_indices;
use rcurc::{DenseMatrix, IndexSet};
use support::{jacobi_svd, numerical_rank};

/// Largest per-row and per-column nonzero counts, by direct counting.
fn support_counts(s: &DenseMatrix) -> (usize, usize) {
    let (n1, n2) = s.shape();
    let row = (0..n1)
        .map(|i| (0..n2).filter(|&j| s.get(i, j) != 0.0).count())
        .max()
        .unwrap_or(0);
    let col = (0..n2)
        .map(|j| (0..n1).filter(|&i| s.get(i, j) != 0.0).count())
        .max()
        .unwrap_or(0);
    (row, col)
}

#[test]
fn generated_low_rank_has_exact_rank() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = gen_low_rank(50, 50, 3, &mut rng).unwrap();
    let sigma = jacobi_svd(&x).sigma;
    assert!(sigma[3] / sigma[0] <= 1e-10);
    assert!(sigma[2] / sigma[0] > 1e-3);
}

#[test]
fn square_factors_are_generically_full_rank() {
    let x = gen_low_rank(12, 12, 12, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
    assert_eq!(numerical_rank(&x, 1e-10), 12);
}

#[test]
fn generation_is_reproducible() {
    let a = SyntheticProblem::generate(30, 20, 2, 0.1, 5.0, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let b = SyntheticProblem::generate(30, 20, 2, 0.1, 5.0, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    assert_eq!(a.y, b.y);
    assert_eq!(a.s_true, b.s_true);
}

#[test]
fn outliers_respect_counts_and_amplitude() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = DenseMatrix::from_fn(100, 100, |i, j| if (i + j) % 2 == 0 { 1.0 } else { -1.0 });
    let s = gen_sparse_outliers(&x, 0.2, 10.0, &mut rng).unwrap();
    let (row, col) = support_counts(&s);
    assert!(row <= 20 && col <= 20, "{row} {col}");
    assert!(s.data().iter().all(|v| v.abs() <= 10.0));
    assert!(s.data().iter().any(|&v| v != 0.0));
    assert_eq!(
        gen_sparse_outliers(&x, 0.0, 10.0, &mut rng).unwrap(),
        DenseMatrix::zeros(100, 100)
    );
    assert!(gen_sparse_outliers(&x, 0.5, 10.0, &mut rng).is_err());
}

#[test]
fn incoherence_examples() {
    let ones = DenseMatrix::from_fn(4, 4, |_, _| 1.0);
    assert!((incoherence_mu(&ones, 1).unwrap() - 1.0).abs() <= 1e-12);
    let spike = DenseMatrix::from_fn(4, 4, |i, j| if (i, j) == (0, 0) { 1.0 } else { 0.0 });
    assert!((incoherence_mu(&spike, 1).unwrap() - 4.0).abs() <= 1e-12);
    assert!((incoherence_mu(&DenseMatrix::identity(6), 6).unwrap() - 1.0).abs() <= 1e-12);
}

#[test]
fn sparsity_examples() {
    assert_eq!(sparsity_alpha(&DenseMatrix::zeros(3, 3)), 0.0);
    let two = DenseMatrix::from_fn(3, 3, |i, j| if i == j && i < 2 { 1.0 } else { 0.0 });
    assert_eq!(sparsity_alpha(&two), 1.0 / 3.0);
    assert_eq!(sparsity_alpha(&DenseMatrix::from_fn(2, 5, |_, _| 3.0)), 1.0);
}

#[test]
fn hand_cur_product() {
    let x = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
    let one = IndexSet::new(vec![0], 2).unwrap();
    let check = cur_exact_check(&x, &one, &one).unwrap();
    assert!(check.ok && check.rel_err <= 1e-15);

    let rank2 = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]);
    assert!(!cur_exact_check(&rank2, &one, &one).unwrap().ok);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn outliers_are_alpha_sparse(n1 in 5usize..60, n2 in 5usize..60, a in 0u32..10, seed in any::<u64>()) {
        let alpha = f64::from(a) / 20.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = gen_low_rank(n1, n2, 1, &mut rng).unwrap();
        let s = gen_sparse_outliers(&x, alpha, 3.0, &mut rng).unwrap();
        let (row, col) = support_counts(&s);
        prop_assert!(row as f64 <= alpha * n2 as f64 + 1e-9);
        prop_assert!(col as f64 <= alpha * n1 as f64 + 1e-9);
        prop_assert!(sparsity_alpha(&s) <= alpha + 1e-12);
    }

    #[test]
    fn incoherence_is_at_least_one(n in 3usize..25, r in 1usize..3, seed in any::<u64>()) {
        let x = gen_low_rank(n, n + 2, r, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(incoherence_mu(&x, r).unwrap() >= 1.0 - 1e-12);
    }

    #[test]
    fn skeleton_with_full_rank_core_is_exact(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = gen_low_rank(30, 25, 3, &mut rng).unwrap();
        let rows = sample_unique_indices(30, 8, &mut rng).unwrap();
        let cols = sample_unique_indices(25, 8, &mut rng).unwrap();
        prop_assume!(core_rank(&x, &rows, &cols).unwrap() == 3);
        prop_assert!(cur_exact_check(&x, &rows, &cols).unwrap().rel_err <= 1e-10);
    }
}
