//! Fast relative-error leverage scores for tall matrices.
//!
//! The estimator sketches `A` with a fast Hadamard-based transform `Π₁`,
//! orthogonalizes the small `r1 x d` sketch to get `R⁻¹`, and returns the
//! squared row norms of `Ω = A · R⁻¹ · Π₂`, where `Π₂` is a JL projection to
//! `r2 = O(ln n / ε²)` columns. `R⁻¹ · Π₂` is formed first so the only pass
//! over `A` costs `O(n d r2)`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{
    pseudoinverse_from_svd, thin_svd, upper_triangular_inverse, DenseMatrix, HouseholderQr,
    LeverageMethod, LeverageReport, DEFAULT_RANK_TOLERANCE,
};
use crate::sketch::{Side, SketchKind, SketchOperator, SketchPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrthoSource {
    /// `R⁻¹ = V Σ⁻¹` from the SVD of `Π₁A`.
    #[default]
    Svd,
    /// Inverse of the triangular factor of a QR of `Π₁A`.
    Qr,
}

/// A `d x ρ` matrix making `Π₁A · R⁻¹` orthonormal.
#[derive(Debug, Clone)]
pub struct Orthogonalizer {
    pub rinv: DenseMatrix,
    pub source: OrthoSource,
}

impl Orthogonalizer {
    pub fn rank(&self) -> usize {
        self.rinv.cols()
    }
}

/// Builds an orthogonalizer for the sketch `pa` (r1 x d, r1 >= d).
///
/// Fails with [`Error::RankDeficient`] when `pa` has numerical rank below `d`.
pub fn build_orthogonalizer(
    pa: &DenseMatrix,
    source: OrthoSource,
    tol: f64,
) -> Result<Orthogonalizer> {
    orthogonalizer(pa, source, tol, false)
}

/// Like [`build_orthogonalizer`] with the SVD source, but drops directions
/// below tolerance instead of failing. The result is `d x ρ`.
pub fn build_truncated_orthogonalizer(pa: &DenseMatrix, tol: f64) -> Result<Orthogonalizer> {
    orthogonalizer(pa, OrthoSource::Svd, tol, true)
}

fn orthogonalizer(
    pa: &DenseMatrix,
    source: OrthoSource,
    tol: f64,
    truncate: bool,
) -> Result<Orthogonalizer> {
    let d = pa.cols();
    if pa.rows() < d {
        return Err(Error::RankDeficient {
            rank: pa.rows(),
            required: d,
        });
    }
    let r = HouseholderQr::new(pa)?.r();
    let svd = thin_svd(&r, tol)?;
    if svd.rank() < d && !(truncate && svd.rank() > 0) {
        return Err(Error::RankDeficient {
            rank: svd.rank(),
            required: d,
        });
    }
    let rinv = match source {
        OrthoSource::Svd => {
            let mut v = svd.v.clone();
            for i in 0..v.rows() {
                for (x, s) in v.row_mut(i).iter_mut().zip(&svd.singular_values) {
                    *x /= s;
                }
            }
            v
        }
        OrthoSource::Qr => upper_triangular_inverse(&r)?,
    };
    Ok(Orthogonalizer { rinv, source })
}

/// Wall-clock milliseconds per phase of one sketched run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub sketch_apply: f64,
    pub factorization: f64,
    pub product: f64,
    pub norms: f64,
}

/// The sketch `Ω = A R⁻¹ Π₂` and the seeds that produced it.
#[derive(Debug, Clone)]
pub struct SketchedBasis {
    /// `n x r2`, rows aligned with the rows of `A`.
    pub omega: DenseMatrix,
    pub plan: SketchPlan,
    pub seed1: u64,
    pub seed2: u64,
    /// Numerical rank of `Π₁A`.
    pub rank: usize,
    pub timings: PhaseTimings,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LeverageOptions {
    pub ortho: OrthoSource,
    /// Continue on a rank-deficient `Π₁A`, estimating leverage of its range.
    pub truncate_rank: bool,
}

/// Relative-error approximations to every leverage score of `a`.
pub fn approx_leverage(
    a: &DenseMatrix,
    plan: &SketchPlan,
    seed: u64,
) -> Result<(LeverageReport, SketchedBasis)> {
    approx_leverage_with(a, plan, seed, LeverageOptions::default())
}

pub fn approx_leverage_with(
    a: &DenseMatrix,
    plan: &SketchPlan,
    seed: u64,
    options: LeverageOptions,
) -> Result<(LeverageReport, SketchedBasis)> {
    check_plan(a, plan)?;
    let mut timings = PhaseTimings::default();

    let start = Instant::now();
    let pa = plan.fjlt_operator(seed)?.apply(a, Side::Left)?;
    timings.sketch_apply = ms(start);

    let start = Instant::now();
    let ortho = if options.truncate_rank {
        build_truncated_orthogonalizer(&pa, plan.rank_tolerance)?
    } else {
        build_orthogonalizer(&pa, options.ortho, plan.rank_tolerance)?
    };
    let rank = ortho.rank();
    timings.factorization = ms(start);

    let start = Instant::now();
    let seed2 = plan.jlt_seed(seed);
    let r2 = if plan.jlt == SketchKind::Identity {
        rank
    } else {
        plan.r2
    };
    let jlt = SketchOperator::new(plan.jlt, seed2, rank, r2)?;
    let mut small = jlt.apply(&ortho.rinv, Side::Right)?;
    if plan.jlt == SketchKind::Gaussian {
        small = small.scaled(1.0 / (r2 as f64).sqrt());
    }
    let omega = a.matmul(&small)?;
    timings.product = ms(start);

    let start = Instant::now();
    let scores = row_scores(a, &omega);
    timings.norms = ms(start);

    let report = LeverageReport::from_scores(
        scores,
        LeverageMethod::Sketched,
        rank,
        Some(plan.clone()),
        Some(seed),
    );
    let basis = SketchedBasis {
        omega,
        plan: plan.clone(),
        seed1: seed,
        seed2,
        rank,
        timings,
    };
    Ok((report, basis))
}

/// Squared row norms of `A R⁻¹` (no second-stage projection).
///
/// Independent of which orthogonalizer is used; these are the leverage scores
/// of `A` measured in the geometry of `Π₁A`.
pub fn intermediate_leverage(
    a: &DenseMatrix,
    plan: &SketchPlan,
    seed: u64,
    source: OrthoSource,
) -> Result<Vec<f64>> {
    check_plan(a, plan)?;
    let pa = plan.fjlt_operator(seed)?.apply(a, Side::Left)?;
    let ortho = build_orthogonalizer(&pa, source, plan.rank_tolerance)?;
    Ok(row_scores(a, &a.matmul(&ortho.rinv)?))
}

fn check_plan(a: &DenseMatrix, plan: &SketchPlan) -> Result<()> {
    let (n, d) = a.shape();
    if n <= d || d == 0 {
        return Err(Error::ShapeError(format!(
            "leverage sketch needs n > d >= 1, got {n}x{d}"
        )));
    }
    if (plan.n_rows, plan.n_cols) != (n, d) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{} (plan)", plan.n_rows, plan.n_cols),
            found: format!("{n}x{d}"),
        });
    }
    Ok(())
}

/// Squared row norms of `omega`; structurally zero rows of `a` score exactly 0.
fn row_scores(a: &DenseMatrix, omega: &DenseMatrix) -> Vec<f64> {
    a.row_iter()
        .zip(omega.row_iter())
        .map(|(arow, orow)| {
            if arow.iter().all(|&v| v == 0.0) {
                0.0
            } else {
                orow.iter().map(|v| v * v).sum()
            }
        })
        .collect()
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Rows of the SRHT used by [`mi_estimate`]: `⌈n ln d / ln² n⌉`, clamped to `[d, n]`.
pub fn mi_sketch_rows(n: usize, d: usize) -> usize {
    let (nf, df) = (n as f64, d as f64);
    let ln_n = nf.ln();
    let r = (nf * df.ln() / (ln_n * ln_n)).ceil();
    (r as usize).clamp(d, n)
}

/// Single-projection baseline estimator.
///
/// With `X = (ΠA)† Π` for an SRHT `Π`, each raw estimate is `⟨A_(t), X^(t)⟩`;
/// values are floored at `d ln² n / (4n)` and renormalized. Only an `O(ln² n)`
/// factor approximation is expected. `scores` holds the floored weights.
pub fn mi_estimate(a: &DenseMatrix, seed: u64) -> Result<LeverageReport> {
    let (n, d) = a.shape();
    if n <= d || d == 0 {
        return Err(Error::ShapeError(format!(
            "estimator needs n > d >= 1, got {n}x{d}"
        )));
    }
    let r = mi_sketch_rows(n, d);
    let op = SketchOperator::srht(seed, n, r)?;
    let pa = op.apply(a, Side::Left)?;
    let svd = thin_svd(&pa, DEFAULT_RANK_TOLERANCE)?;
    if svd.rank() < d {
        return Err(Error::RankDeficient {
            rank: svd.rank(),
            required: d,
        });
    }
    // M = A (ΠA)†, n x r; the estimate for row t pairs M's row t with column t of Π
    let m = a.matmul(&pseudoinverse_from_svd(&svd))?;
    let signs = op.signs();
    let rows = op.selected_rows();
    let entry_scale = op.scale() / (op.padded_dim() as f64).sqrt();
    let ln_n = (n as f64).ln();
    let floor = d as f64 * ln_n * ln_n / (4.0 * n as f64);
    let weights: Vec<f64> = (0..n)
        .map(|t| {
            let raw: f64 = m
                .row(t)
                .iter()
                .zip(&rows)
                .map(|(mk, &row)| {
                    let h = if (row & t).count_ones() % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    };
                    mk * h
                })
                .sum::<f64>()
                * entry_scale
                * signs[t];
            raw.max(floor)
        })
        .collect();
    Ok(LeverageReport::from_scores(
        weights,
        LeverageMethod::MiEstimator,
        d,
        None,
        Some(seed),
    ))
}
