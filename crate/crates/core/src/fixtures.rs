//! Seeded test matrices with known leverage structure.

use rand::seq::index;

use crate::error::{Error, Result};
use crate::matcore::DenseMatrix;
use crate::rng::{derive_seed, seeded_gaussian_matrix, stream_rng};

/// `e₁ᵀ … e_dᵀ` stacked over `n - d` zero rows. Leverage `(1,…,1,0,…,0)`.
pub fn canonical_rows(n: usize, d: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n, d, |i, j| if i == j { 1.0 } else { 0.0 })
}

/// `d` seeded distinct columns of the normalized `n x n` Hadamard matrix.
/// Every leverage score equals `d / n`.
pub fn hadamard_columns(n: usize, d: usize, seed: u64) -> Result<DenseMatrix> {
    if d > n {
        return Err(Error::InvalidParameter(format!(
            "cannot take {d} columns of a Hadamard matrix of order {n}"
        )));
    }
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let mut rng = stream_rng(seed, 0);
    let mut cols = index::sample(&mut rng, n, d).into_vec();
    cols.sort_unstable();
    DenseMatrix::hadamard_columns(n, &cols)
}

/// i.i.d. standard normal entries.
pub fn gaussian(n: usize, d: usize, seed: u64) -> DenseMatrix {
    seeded_gaussian_matrix(n, d, seed)
}

/// Gaussian matrix whose first `spikes` rows are scaled by `magnitude`,
/// giving a few rows with leverage near one.
pub fn spiked(n: usize, d: usize, spikes: usize, magnitude: f64, seed: u64) -> DenseMatrix {
    let mut a = gaussian(n, d, seed);
    for i in 0..spikes.min(n) {
        for v in a.row_mut(i) {
            *v *= magnitude;
        }
    }
    a
}

/// Gaussian noise with row `j` a copy of row `i`, both scaled by `magnitude`.
/// The pair `(i, j)` has cross-leverage equal to the shared leverage score.
pub fn planted_pair(
    n: usize,
    d: usize,
    i: usize,
    j: usize,
    magnitude: f64,
    seed: u64,
) -> DenseMatrix {
    let mut a = gaussian(n, d, seed);
    let row: Vec<f64> = a.row(i).iter().map(|v| v * magnitude).collect();
    a.row_mut(i).copy_from_slice(&row);
    a.row_mut(j).copy_from_slice(&row);
    a
}

/// Product of two Gaussian factors; rank exactly `rank` with probability one.
pub fn low_rank(n: usize, d: usize, rank: usize, seed: u64) -> DenseMatrix {
    let left = gaussian(n, rank, derive_seed(seed, 1));
    let right = gaussian(rank, d, derive_seed(seed, 2));
    left.matmul(&right).expect("conforming factors")
}

/// `diag(I_k, (1 - gamma) I_{n-k})`: a spectral gap of `gamma` after `k`.
pub fn gap_block(n: usize, k: usize, gamma: f64) -> DenseMatrix {
    DenseMatrix::from_fn(n, n, |i, j| match (i == j, i < k) {
        (true, true) => 1.0,
        (true, false) => 1.0 - gamma,
        _ => 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{exact_cross_leverage, exact_leverage, thin_svd};

    #[test]
    fn fixture_structure() {
        let h = hadamard_columns(64, 5, 3).unwrap();
        assert!(exact_leverage(&h)
            .unwrap()
            .scores
            .iter()
            .all(|s| (s - 5.0 / 64.0).abs() < 1e-13));
        let p = planted_pair(40, 3, 3, 7, 20.0, 1);
        let c = exact_cross_leverage(&p).unwrap();
        assert!((c[(3, 7)] - c[(3, 3)]).abs() < 1e-12);
        assert!(c[(3, 3)] > 0.4);
        assert_eq!(thin_svd(&low_rank(30, 20, 3, 2), 1e-12).unwrap().rank(), 3);
        let s = spiked(100, 4, 2, 1e3, 5);
        assert!(exact_leverage(&s).unwrap().coherence > 0.9);
    }
}
