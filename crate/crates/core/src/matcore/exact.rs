use serde::{Deserialize, Serialize};

use super::dense::{dot, DenseMatrix};
use super::factor::{thin_svd, DEFAULT_RANK_TOLERANCE};
use crate::error::{Error, Result};
use crate::sketch::SketchPlan;

/// Default largest `n` for which a dense `n x n` cross-leverage matrix is formed.
pub const DEFAULT_DENSE_GRAM_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeverageMethod {
    Exact,
    Sketched,
    MiEstimator,
}

/// Per-row leverage scores together with how they were obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeverageReport {
    pub scores: Vec<f64>,
    /// Largest score.
    pub coherence: f64,
    /// `scores / sum(scores)`; all zeros when every score is zero.
    pub normalized: Vec<f64>,
    pub method: LeverageMethod,
    pub params: Option<SketchPlan>,
    pub seed: Option<u64>,
    /// Rank of the column space the scores describe.
    pub rank: usize,
}

impl LeverageReport {
    pub fn from_scores(
        scores: Vec<f64>,
        method: LeverageMethod,
        rank: usize,
        params: Option<SketchPlan>,
        seed: Option<u64>,
    ) -> Self {
        let coherence = scores.iter().copied().fold(0.0, f64::max);
        let normalized = normalize(&scores);
        Self {
            scores,
            coherence,
            normalized,
            method,
            params,
            seed,
            rank,
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Divides by the total; all zeros when the total is zero.
pub fn normalize(values: &[f64]) -> Vec<f64> {
    let total: f64 = values.iter().sum();
    if total > 0.0 {
        values.iter().map(|v| v / total).collect()
    } else {
        vec![0.0; values.len()]
    }
}

/// Maximum leverage score (matrix coherence).
pub fn coherence(report: &LeverageReport) -> f64 {
    report.scores.iter().copied().fold(0.0, f64::max)
}

/// Squared row norms of an orthonormal basis.
pub fn leverage_from_basis(basis: &DenseMatrix) -> Vec<f64> {
    basis.row_norms_sq()
}

/// Exact leverage scores: squared row norms of the left singular vectors.
pub fn exact_leverage(a: &DenseMatrix) -> Result<LeverageReport> {
    exact_leverage_with_tolerance(a, DEFAULT_RANK_TOLERANCE)
}

pub fn exact_leverage_with_tolerance(a: &DenseMatrix, tol: f64) -> Result<LeverageReport> {
    let svd = thin_svd(a, tol)?;
    Ok(LeverageReport::from_scores(
        leverage_from_basis(&svd.u),
        LeverageMethod::Exact,
        svd.rank(),
        None,
        None,
    ))
}

/// Dense `n x n` projector `U Uᵀ`; entry `(i, j)` is the cross-leverage score.
pub fn exact_cross_leverage(a: &DenseMatrix) -> Result<DenseMatrix> {
    exact_cross_leverage_capped(a, DEFAULT_DENSE_GRAM_CAP)
}

pub fn exact_cross_leverage_capped(a: &DenseMatrix, cap: usize) -> Result<DenseMatrix> {
    if a.rows() > cap {
        return Err(Error::MatrixTooLargeForDenseGram { n: a.rows(), cap });
    }
    let u = thin_svd(a, DEFAULT_RANK_TOLERANCE)?.u;
    let n = u.rows();
    // symmetric by construction: compute the upper triangle and mirror it
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let c = dot(u.row(i), u.row(j));
            out[(i, j)] = c;
            out[(j, i)] = c;
        }
    }
    Ok(out)
}
