//! Large cross-leverage scores.
//!
//! [`heavy_pairs`] finds every unordered row pair of a matrix `X` whose squared
//! inner product is at least `‖XᵀX‖_F² / κ`. Rows are sorted by norm and a
//! two-pointer scan enumerates exactly the pairs whose norm product clears the
//! threshold (a Cauchy–Schwarz superset), which are then verified with one
//! inner product each. [`approx_cross_leverage`] runs the search on the
//! leverage sketch `Ω`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levscore::{approx_leverage_with, LeverageOptions, SketchedBasis};
use crate::matcore::{dot, DenseMatrix};
use crate::sketch::SketchPlan;

/// Slack on the norm-product prefilter so rounding never drops a pair that
/// passes the exact inner-product test.
const PREFILTER_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeavyPair {
    /// Always `i <= j`.
    pub i: usize,
    pub j: usize,
    /// Squared inner product of rows `i` and `j`.
    pub c_sq: f64,
}

impl HeavyPair {
    pub fn is_diagonal(&self) -> bool {
        self.i == self.j
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeavyPairSet {
    /// Sorted by `(i, j)`.
    pub pairs: Vec<HeavyPair>,
    /// `gram_fro_sq / kappa`.
    pub threshold: f64,
    /// The κ the search ran with.
    pub kappa: f64,
    /// `‖XᵀX‖_F²`.
    pub gram_fro_sq: f64,
    /// Number of norm-heavy candidate pairs that were verified.
    pub candidates: usize,
}

impl HeavyPairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let (i, j) = (i.min(j), i.max(j));
        self.pairs
            .binary_search_by(|p| (p.i, p.j).cmp(&(i, j)))
            .is_ok()
    }

    /// Drops the `(i, i)` pairs.
    pub fn off_diagonal(mut self) -> Self {
        self.pairs.retain(|p| !p.is_diagonal());
        self
    }
}

/// All unordered pairs `(i, j)`, `i <= j`, with `⟨xᵢ, xⱼ⟩² >= ‖XᵀX‖_F² / κ`.
///
/// Runs in `O(n r + n ln n + s r)` where `s` is the number of norm-heavy pairs.
pub fn heavy_pairs(x: &DenseMatrix, kappa: f64) -> Result<HeavyPairSet> {
    if !(kappa.is_finite() && kappa > 1.0) {
        return Err(Error::InvalidKappa(kappa));
    }
    let n = x.rows();
    let gram = x.transpose_matmul(x)?;
    let gram_fro_sq: f64 = gram.as_slice().iter().map(|v| v * v).sum();
    if gram_fro_sq == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let threshold = gram_fro_sq / kappa;
    let prefilter = threshold * (1.0 - PREFILTER_SLACK);

    let norms = x.row_norms_sq();
    let mut order: Vec<usize> = (0..n).collect();
    // ascending norm, ties by ascending row index
    order.sort_by(|&a, &b| norms[a].total_cmp(&norms[b]).then(a.cmp(&b)));

    let mut pairs = Vec::new();
    let mut candidates = 0usize;
    let mut low = 0usize;
    'scan: for high in (0..n).rev() {
        if low > high {
            break;
        }
        let top = order[high];
        while norms[top] * norms[order[low]] < prefilter {
            low += 1;
            if low > high {
                break 'scan;
            }
        }
        for &other in &order[low..=high] {
            candidates += 1;
            let c = dot(x.row(top), x.row(other));
            let c_sq = c * c;
            if c_sq >= threshold {
                pairs.push(HeavyPair {
                    i: top.min(other),
                    j: top.max(other),
                    c_sq,
                });
            }
        }
    }
    pairs.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)));
    // each heavy pair carries at least 1/κ of Σ_{i,j} ⟨xᵢ,xⱼ⟩² = ‖XᵀX‖_F²
    assert!(
        pairs.len() as f64 <= (kappa * x.cols() as f64).ceil(),
        "heavy-pair count {} exceeds κ·r",
        pairs.len()
    );
    Ok(HeavyPairSet {
        pairs,
        threshold,
        kappa,
        gram_fro_sq,
        candidates,
    })
}

/// How κ is inflated before searching the sketch `Ω`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaInflation {
    /// `κ' = κ ‖ΩᵀΩ‖_F² / d`, so the search threshold is exactly `d / κ`.
    #[default]
    Normalized,
    /// `κ' = κ (1 + 30 d ε)`, an upper bound on the normalized value under the
    /// JLT events; returns a larger superset.
    WorstCase,
}

impl KappaInflation {
    pub fn inflate(self, kappa: f64, rank: usize, epsilon: f64, gram_fro_sq: f64) -> f64 {
        match self {
            KappaInflation::Normalized => kappa * gram_fro_sq / rank as f64,
            KappaInflation::WorstCase => kappa * (1.0 + 30.0 * rank as f64 * epsilon),
        }
    }
}

/// Large cross-leverage scores of `a` estimated from the leverage sketch.
///
/// Returned `c_sq` values are squared inner products of sketch rows; the sign
/// of the underlying cross-leverage score is not recovered.
pub fn approx_cross_leverage(
    a: &DenseMatrix,
    plan: &SketchPlan,
    kappa: f64,
    seed: u64,
) -> Result<HeavyPairSet> {
    Ok(approx_cross_leverage_with(a, plan, kappa, seed, KappaInflation::default())?.0)
}

pub fn approx_cross_leverage_with(
    a: &DenseMatrix,
    plan: &SketchPlan,
    kappa: f64,
    seed: u64,
    inflation: KappaInflation,
) -> Result<(HeavyPairSet, SketchedBasis)> {
    if !(kappa.is_finite() && kappa > 1.0) {
        return Err(Error::InvalidKappa(kappa));
    }
    let (_, basis) = approx_leverage_with(a, plan, seed, LeverageOptions::default())?;
    let set = heavy_pairs_from_basis(&basis, kappa, inflation)?;
    Ok((set, basis))
}

/// Heavy-pair search on an existing sketch.
pub fn heavy_pairs_from_basis(
    basis: &SketchedBasis,
    kappa: f64,
    inflation: KappaInflation,
) -> Result<HeavyPairSet> {
    let omega = &basis.omega;
    let gram = omega.transpose_matmul(omega)?;
    let fro_sq: f64 = gram.as_slice().iter().map(|v| v * v).sum();
    if fro_sq == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let inflated = inflation.inflate(kappa, basis.rank, basis.plan.epsilon, fro_sq);
    heavy_pairs(omega, inflated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::matcore::thin_svd;
    use crate::rng::seeded_gaussian_matrix;

    fn brute_force(x: &DenseMatrix, kappa: f64) -> Vec<(usize, usize)> {
        let mut g = 0.0;
        for i in 0..x.rows() {
            for j in 0..x.rows() {
                let c: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| a * b).sum();
                g += c * c;
            }
        }
        let mut out = Vec::new();
        for i in 0..x.rows() {
            for j in i..x.rows() {
                let c: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| a * b).sum();
                if c * c >= g / kappa {
                    out.push((i, j));
                }
            }
        }
        out
    }

    fn pair_ids(set: &HeavyPairSet) -> Vec<(usize, usize)> {
        set.pairs.iter().map(|p| (p.i, p.j)).collect()
    }

    #[test]
    fn two_canonical_rows_have_no_heavy_pair() {
        let x = DenseMatrix::identity(2);
        let set = heavy_pairs(&x, 1.5).unwrap();
        assert!(set.is_empty());
        assert!((set.threshold - 2.0 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn identity_diagonal_pairs_at_threshold() {
        let set = heavy_pairs(&DenseMatrix::identity(4), 4.0).unwrap();
        assert_eq!(pair_ids(&set), vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
        assert!(set.pairs.iter().all(|p| p.c_sq == 1.0));
        assert_eq!(set.threshold, 1.0);
        assert!(set.off_diagonal().is_empty());
    }

    #[test]
    fn matches_brute_force() {
        for (seed, kappa) in [(1u64, 10.0), (2, 2.0), (3, 100.0), (4, 1000.0)] {
            let x = seeded_gaussian_matrix(30, 5, seed);
            let set = heavy_pairs(&x, kappa).unwrap();
            assert_eq!(pair_ids(&set), brute_force(&x, kappa), "seed {seed}");
        }
    }

    #[test]
    fn ties_resolved_deterministically() {
        let x = DenseMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        let a = heavy_pairs(&x, 8.0).unwrap();
        assert_eq!(
            pair_ids(&a),
            vec![(0, 0), (0, 2), (1, 1), (1, 3), (2, 2), (3, 3)]
        );
        assert_eq!(a, heavy_pairs(&x, 8.0).unwrap());
    }

    #[test]
    fn parameter_errors() {
        let x = DenseMatrix::identity(3);
        assert_eq!(heavy_pairs(&x, 1.0), Err(Error::InvalidKappa(1.0)));
        assert!(matches!(
            heavy_pairs(&x, f64::NAN),
            Err(Error::InvalidKappa(_))
        ));
        assert_eq!(
            heavy_pairs(&DenseMatrix::zeros(3, 2), 2.0),
            Err(Error::ZeroMatrix)
        );
    }

    #[test]
    fn degenerate_sketch_matches_exact_basis() {
        let a = seeded_gaussian_matrix(120, 4, 9);
        let plan = SketchPlan::degenerate(120, 4, 0.5).unwrap();
        let kappa = 120.0 * 120f64.ln();
        let sketched = approx_cross_leverage(&a, &plan, kappa, 5).unwrap();
        let u = thin_svd(&a, 1e-12).unwrap().u;
        let exact = heavy_pairs(&u, kappa).unwrap();
        assert!((exact.threshold - 4.0 / kappa).abs() < 1e-12);
        assert_eq!(pair_ids(&sketched), pair_ids(&exact));
        for (s, e) in sketched.pairs.iter().zip(&exact.pairs) {
            assert!((s.c_sq - e.c_sq).abs() < 1e-10);
        }
    }

    #[test]
    fn orthogonal_rows_yield_no_off_diagonal_pairs() {
        let a = fixtures::canonical_rows(64, 4);
        let plan = SketchPlan::degenerate(64, 4, 0.5).unwrap();
        for kappa in [2.0, 16.0, 64.0] {
            let set = approx_cross_leverage(&a, &plan, kappa, 1).unwrap();
            assert!(set.clone().off_diagonal().is_empty());
        }
    }

    #[test]
    fn worst_case_inflation_returns_superset() {
        let a = fixtures::planted_pair(256, 6, 3, 7, 30.0, 2);
        let plan = SketchPlan::practical(256, 6, 0.5).unwrap();
        let kappa = 256.0 * 256f64.ln();
        let (norm, _) =
            approx_cross_leverage_with(&a, &plan, kappa, 4, KappaInflation::Normalized).unwrap();
        let (worst, _) =
            approx_cross_leverage_with(&a, &plan, kappa, 4, KappaInflation::WorstCase).unwrap();
        assert!(norm.contains(3, 7));
        assert!(worst.threshold <= norm.threshold);
        assert!(norm.pairs.iter().all(|p| worst.contains(p.i, p.j)));
    }
}
