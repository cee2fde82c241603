//! Rank-`k` leverage scores of general matrices.
//!
//! Both paths sketch the column space with a Gaussian test matrix and return
//! normalized scores `p̂` that approximate the leverage of some rank-`k`
//! matrix `X` close to `A`:
//!
//! * spectral: `B = (AAᵀ)^q A Π` with `2k` columns; scores of `B` come from
//!   the fast tall-matrix estimator and are divided by their sum.
//! * Frobenius: `B = A Π` with `r = k + ⌈10k/ε + 1⌉` columns, `Q = orth(B)`,
//!   and `p̂ᵢ = ‖(Q U_{QᵀA,k})_(i)‖² / k`. These are exactly the normalized
//!   leverage scores of `X = Q (QᵀA)_k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levscore::{approx_leverage_with, LeverageOptions};
use crate::matcore::{normalize, orthonormal_basis, thin_svd, DenseMatrix, DEFAULT_RANK_TOLERANCE};
use crate::rng::derive_seed;
use crate::sketch::{Side, SketchOperator, SketchPlan};

const INNER_SEED_SALT: u64 = 0x524b_4c45;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankNorm {
    Spectral,
    Frobenius,
}

/// Resolved sketch sizes for one rank-`k` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankKPlan {
    pub k: usize,
    pub epsilon: f64,
    pub norm: RankNorm,
    /// Power-iteration depth; zero on the Frobenius path.
    pub q: usize,
    /// Columns of the Gaussian test matrix.
    pub r: usize,
    pub q_override: Option<usize>,
    /// Re-orthonormalize after every multiplication by `A` or `Aᵀ`. Without it
    /// the columns collapse onto the top singular vector once `q` is large.
    pub reorthonormalize: bool,
}

impl RankKPlan {
    pub fn spectral(n: usize, d: usize, k: usize, epsilon: f64) -> Result<Self> {
        check_k(n, d, k)?;
        Ok(Self {
            k,
            epsilon,
            norm: RankNorm::Spectral,
            q: power_q(n, d, k, epsilon)?,
            r: 2 * k,
            q_override: None,
            reorthonormalize: true,
        })
    }

    pub fn frobenius(n: usize, d: usize, k: usize, epsilon: f64) -> Result<Self> {
        check_k(n, d, k)?;
        check_epsilon(epsilon)?;
        Ok(Self {
            k,
            epsilon,
            norm: RankNorm::Frobenius,
            q: 0,
            r: frobenius_width(k, epsilon),
            q_override: None,
            reorthonormalize: false,
        })
    }

    pub fn with_q(mut self, q: usize) -> Self {
        self.q_override = Some(q);
        self.q = q;
        self
    }

    pub fn with_reorthonormalization(mut self, on: bool) -> Self {
        self.reorthonormalize = on;
        self
    }
}

/// Normalized rank-`k` leverage estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedLevReport {
    /// Nonnegative, sums to one.
    pub p_hat: Vec<f64>,
    pub k: usize,
    pub norm: RankNorm,
    /// Claimed β of the β-approximation.
    pub beta_claim: f64,
    pub seed: u64,
    pub plan: RankKPlan,
}

/// Factored rank-`k` approximation `X = left · right`.
#[derive(Debug, Clone)]
pub struct LowRankSketch {
    /// Orthonormal basis of the sketched column space.
    pub q: DenseMatrix,
    /// `Q U_{QᵀA,k}`, `n x k`, orthonormal columns; the left singular vectors of `X`.
    pub left: DenseMatrix,
    /// `Σ_{QᵀA,k} V_{QᵀA,k}ᵀ`, `k x d`.
    pub right: DenseMatrix,
}

impl LowRankSketch {
    pub fn assemble(&self) -> DenseMatrix {
        self.left.matmul(&self.right).expect("conforming factors")
    }

    pub fn rank(&self) -> usize {
        self.left.cols()
    }
}

fn check_k(n: usize, d: usize, k: usize) -> Result<()> {
    if k < 2 || k >= n.min(d) {
        return Err(Error::InvalidParameter(format!(
            "rank parameter must satisfy 2 <= k < min(n, d) = {}, got {k}",
            n.min(d)
        )));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    Ok(())
}

fn frobenius_width(k: usize, epsilon: f64) -> usize {
    k + (10.0 * k as f64 / epsilon + 1.0).ceil() as usize
}

/// Power-iteration depth for the spectral sketch.
///
/// The printed bound divides by `2 ln(1 + ε/10) − 1/2`, which is negative for
/// every `ε < 1`, so the `−1/2` is dropped:
/// `q = max(1, ⌈ln(1 + √(k/(k−1)) + e √(2/k) √(min(n,d) − k)) / (2 ln(1 + ε/10))⌉)`.
pub fn power_q(n: usize, d: usize, k: usize, epsilon: f64) -> Result<usize> {
    check_k(n, d, k)?;
    check_epsilon(epsilon)?;
    let kf = k as f64;
    let m = n.min(d) as f64;
    let numerator = (1.0
        + (kf / (kf - 1.0)).sqrt()
        + std::f64::consts::E * (2.0 / kf).sqrt() * (m - kf).sqrt())
    .ln();
    let literal = 2.0 * (epsilon / 10.0).ln_1p() - 0.5;
    let denominator = if literal > 0.0 {
        literal
    } else {
        2.0 * (epsilon / 10.0).ln_1p()
    };
    Ok(((numerator / denominator).ceil() as usize).max(1))
}

fn check_input(a: &DenseMatrix, k: usize) -> Result<()> {
    let (n, d) = a.shape();
    if a.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    check_k(n, d, k)
}

fn gaussian_test_matrix(a: &DenseMatrix, cols: usize, seed: u64) -> Result<DenseMatrix> {
    // B = A Π with Π d x cols, i.e. A · Gᵀ for G cols x d
    let g = SketchOperator::gaussian(seed, a.cols(), cols)?;
    g.apply(a, Side::Right)
}

fn normalize_columns(b: &mut DenseMatrix) {
    let norms: Vec<f64> = (0..b.cols())
        .map(|j| b.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    for i in 0..b.rows() {
        for (x, &s) in b.row_mut(i).iter_mut().zip(&norms) {
            if s > 0.0 {
                *x /= s;
            }
        }
    }
}

/// `B = (AAᵀ)^q A Π` with a Gaussian `Π` of `plan.r` columns.
///
/// Each product is followed by a column-pivoted QR that keeps only the
/// numerically nonzero directions (or, with re-orthonormalization off,
/// a rescaling of every column to unit norm). Neither changes the column space
/// in exact arithmetic.
pub fn spectral_sketch(a: &DenseMatrix, plan: &RankKPlan, seed: u64) -> Result<DenseMatrix> {
    check_input(a, plan.k)?;
    let step = |m: DenseMatrix| -> Result<DenseMatrix> {
        if plan.reorthonormalize {
            // rank revealing, so directions that are pure rounding noise are dropped
            orthonormal_basis(&m, DEFAULT_RANK_TOLERANCE)
        } else {
            let mut m = m;
            normalize_columns(&mut m);
            Ok(m)
        }
    };
    let mut b = step(gaussian_test_matrix(a, plan.r, seed)?)?;
    for _ in 0..plan.q {
        let c = step(a.transpose_matmul(&b)?)?;
        b = step(a.matmul(&c)?)?;
    }
    Ok(b)
}

/// Best rank-`k` approximation of `A` within the column space of `sketch`.
pub fn project_rank_k(a: &DenseMatrix, sketch: &DenseMatrix, k: usize) -> Result<LowRankSketch> {
    let q = orthonormal_basis(sketch, DEFAULT_RANK_TOLERANCE)?;
    if q.cols() < k {
        return Err(Error::RankTooLow { rank: q.cols(), k });
    }
    let qta = q.transpose_matmul(a)?;
    let svd = thin_svd(&qta, DEFAULT_RANK_TOLERANCE)?;
    if svd.rank() < k {
        return Err(Error::RankTooLow {
            rank: svd.rank(),
            k,
        });
    }
    let top = svd.truncated(k);
    let left = q.matmul(&top.u)?;
    let mut right = top.v.transpose();
    for (i, s) in top.singular_values.iter().enumerate() {
        for x in right.row_mut(i) {
            *x *= s;
        }
    }
    Ok(LowRankSketch { q, left, right })
}

/// Spectral-norm path: `p̂ᵢ = ℓ̂ᵢ / Σℓ̂ⱼ` for the sketched leverage `ℓ̂` of `B`.
pub fn spectral_rankk(
    a: &DenseMatrix,
    k: usize,
    epsilon: f64,
    seed: u64,
) -> Result<NormalizedLevReport> {
    let plan = RankKPlan::spectral(a.rows(), a.cols(), k, epsilon)?;
    spectral_rankk_with(a, &plan, seed)
}

pub fn spectral_rankk_with(
    a: &DenseMatrix,
    plan: &RankKPlan,
    seed: u64,
) -> Result<NormalizedLevReport> {
    let b = spectral_sketch(a, plan, seed)?;
    let n = b.rows();
    if n <= b.cols() {
        return Err(Error::ShapeError(format!(
            "spectral path needs n > 2k, got n = {n}, 2k = {}",
            b.cols()
        )));
    }
    // the tall-matrix estimator takes ε in (0, 1/2]
    let inner_eps = plan.epsilon.min(0.5);
    let inner = SketchPlan::practical(n, b.cols(), inner_eps)?;
    let options = LeverageOptions {
        truncate_rank: true,
        ..Default::default()
    };
    let (lev, _) = approx_leverage_with(&b, &inner, derive_seed(seed, INNER_SEED_SALT), options)?;
    if lev.rank < plan.k {
        return Err(Error::RankTooLow {
            rank: lev.rank,
            k: plan.k,
        });
    }
    Ok(NormalizedLevReport {
        p_hat: normalize(&lev.scores),
        k: plan.k,
        norm: RankNorm::Spectral,
        beta_claim: (1.0 - plan.epsilon) / (2.0 * (1.0 + plan.epsilon)),
        seed,
        plan: plan.clone(),
    })
}

/// Spectral-path rank-`k` approximation `X = Q (QᵀA)_k` with `Q = orth(B)`.
pub fn spectral_sketch_matrix(
    a: &DenseMatrix,
    plan: &RankKPlan,
    seed: u64,
) -> Result<LowRankSketch> {
    let b = spectral_sketch(a, plan, seed)?;
    project_rank_k(a, &b, plan.k)
}

/// Frobenius-path factors `Q` and `X = (Q U_k)(Σ_k V_kᵀ)`.
pub fn frobenius_sketch_matrix(
    a: &DenseMatrix,
    k: usize,
    epsilon: f64,
    seed: u64,
) -> Result<LowRankSketch> {
    let plan = RankKPlan::frobenius(a.rows(), a.cols(), k, epsilon)?;
    frobenius_sketch_matrix_with(a, &plan, seed)
}

pub fn frobenius_sketch_matrix_with(
    a: &DenseMatrix,
    plan: &RankKPlan,
    seed: u64,
) -> Result<LowRankSketch> {
    check_input(a, plan.k)?;
    let b = gaussian_test_matrix(a, plan.r, seed)?;
    project_rank_k(a, &b, plan.k)
}

/// Frobenius-norm path: exact normalized leverage scores of `X = Q (QᵀA)_k`.
pub fn frobenius_rankk(
    a: &DenseMatrix,
    k: usize,
    epsilon: f64,
    seed: u64,
) -> Result<NormalizedLevReport> {
    let plan = RankKPlan::frobenius(a.rows(), a.cols(), k, epsilon)?;
    frobenius_rankk_with(a, &plan, seed)
}

pub fn frobenius_rankk_with(
    a: &DenseMatrix,
    plan: &RankKPlan,
    seed: u64,
) -> Result<NormalizedLevReport> {
    let sketch = frobenius_sketch_matrix_with(a, plan, seed)?;
    let k = plan.k as f64;
    let p_hat = sketch.left.row_norms_sq().iter().map(|l| l / k).collect();
    Ok(NormalizedLevReport {
        p_hat,
        k: plan.k,
        norm: RankNorm::Frobenius,
        beta_claim: 1.0,
        seed,
        plan: plan.clone(),
    })
}
