//! Column sampling for under-constrained least squares.
//!
//! For `A` of shape `n x d` with `n < d` and full row rank, the minimum-norm
//! solution of `Ax = b` is `x_opt = A†b`. Sampling `r` columns with
//! probabilities proportional to the leverage of `Aᵀ` and rescaling them gives
//! `x̃ = Aᵀ (AS)^{†T} (AS)^† b`, with `‖x̃ − x_opt‖ ≤ 2ε‖x_opt‖` whenever the
//! sampled Gram matrix is an ε-isometry.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levscore::approx_leverage;
use crate::matcore::{exact_leverage, normalize, thin_svd, DenseMatrix, DEFAULT_RANK_TOLERANCE};
use crate::rng::{stream_rng, STREAM_ROW_SAMPLE};
use crate::sketch::SketchPlan;

const PROB_SUM_TOLERANCE: f64 = 1e-12;

/// Implicit `d x r` matrix with one nonzero per column: `S[selected[t], t] = weights[t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingMatrix {
    pub d: usize,
    pub r: usize,
    pub selected: Vec<usize>,
    pub weights: Vec<f64>,
}

impl SamplingMatrix {
    /// `M S` for `M` with `d` columns.
    pub fn right_apply(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        if m.cols() != self.d {
            return Err(Error::DimensionMismatch {
                expected: format!("{} columns", self.d),
                found: format!("{} columns", m.cols()),
            });
        }
        Ok(DenseMatrix::from_fn(m.rows(), self.r, |i, t| {
            m[(i, self.selected[t])] * self.weights[t]
        }))
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut s = DenseMatrix::zeros(self.d, self.r);
        for (t, (&i, &w)) in self.selected.iter().zip(&self.weights).enumerate() {
            s.row_mut(i)[t] = w;
        }
        s
    }
}

/// Column probabilities with their claimed approximation factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingProbabilities {
    pub p: Vec<f64>,
    pub beta: f64,
}

impl SamplingProbabilities {
    pub fn new(p: Vec<f64>, beta: f64) -> Result<Self> {
        let probs = Self { p, beta };
        probs.validate()?;
        Ok(probs)
    }

    pub fn uniform(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::EmptyMatrix);
        }
        Self::new(vec![1.0 / d as f64; d], 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p.is_empty() {
            return Err(Error::InvalidParameter("empty probability vector".into()));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must lie in (0, 1], got {}",
                self.beta
            )));
        }
        if let Some(i) = self.p.iter().position(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "probability {i} is {}",
                self.p[i]
            )));
        }
        let sum: f64 = self.p.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE * self.p.len().max(1) as f64 {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {sum}"
            )));
        }
        Ok(())
    }

    /// Largest `β'` with `pᵢ ≥ β' ℓᵢ / n` for every `i`, given exact scores `ℓ`.
    pub fn achieved_beta(&self, leverage: &[f64]) -> f64 {
        let n: f64 = leverage.iter().sum();
        self.p
            .iter()
            .zip(leverage)
            .filter(|(_, &l)| l > 0.0)
            .map(|(&p, &l)| p * n / l)
            .fold(f64::INFINITY, f64::min)
    }
}

/// `r = ⌈(96n/(βε²)) ln(96n/(βε²√δ))⌉`.
pub fn sample_size(n: usize, beta: f64, epsilon: f64, delta: f64) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must lie in (0, 1], got {beta}"
        )));
    }
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 0.5], got {epsilon}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let base = 96.0 * n as f64 / (beta * epsilon * epsilon);
    Ok((base * (base / delta.sqrt()).ln()).ceil() as usize)
}

/// `r` i.i.d. draws from `p`, with replacement.
pub fn draw_sampling_matrix(
    probs: &SamplingProbabilities,
    r: usize,
    seed: u64,
) -> Result<SamplingMatrix> {
    probs.validate()?;
    if r == 0 {
        return Err(Error::InvalidParameter(
            "sample count must be positive".into(),
        ));
    }
    let dist = WeightedIndex::new(&probs.p)
        .map_err(|e| Error::InvalidParameter(format!("bad sampling weights: {e}")))?;
    let mut rng = stream_rng(seed, STREAM_ROW_SAMPLE);
    let selected: Vec<usize> = (0..r).map(|_| dist.sample(&mut rng)).collect();
    let rf = r as f64;
    let weights = selected
        .iter()
        .map(|&i| 1.0 / (rf * probs.p[i]).sqrt())
        .collect();
    Ok(SamplingMatrix {
        d: probs.p.len(),
        r,
        selected,
        weights,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnderlsSolution {
    pub x: Vec<f64>,
    pub r: usize,
    /// `‖A x̃ − b‖₂`.
    pub residual_norm: f64,
    pub seed: u64,
    #[serde(skip)]
    pub sampling: Option<SamplingMatrix>,
}

fn check_system(a: &DenseMatrix, b: &[f64]) -> Result<()> {
    let (n, d) = a.shape();
    if a.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if n >= d {
        return Err(Error::ShapeError(format!(
            "under-constrained solve needs n < d, got {n} x {d}"
        )));
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("right-hand side of length {n}"),
            found: format!("length {}", b.len()),
        });
    }
    if let Some(i) = b.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteEntry { row: i, col: 0 });
    }
    Ok(())
}

/// Minimum-norm solution `A†b` through the thin SVD.
pub fn min_norm_solution(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    check_system(a, b)?;
    let svd = thin_svd(a, DEFAULT_RANK_TOLERANCE)?;
    let utb = svd.u.transpose().matvec(b)?;
    let coeffs: Vec<f64> = utb
        .iter()
        .zip(&svd.singular_values)
        .map(|(c, s)| c / s)
        .collect();
    svd.v.matvec(&coeffs)
}

/// `x̃ = Aᵀ U Σ⁻² Uᵀ b` for the thin SVD `AS = U Σ Wᵀ`.
pub fn underls_solve(
    a: &DenseMatrix,
    b: &[f64],
    probs: &SamplingProbabilities,
    epsilon: f64,
    delta: f64,
    seed: u64,
) -> Result<UnderlsSolution> {
    check_system(a, b)?;
    let (n, d) = a.shape();
    if probs.p.len() != d {
        return Err(Error::DimensionMismatch {
            expected: format!("{d} probabilities"),
            found: format!("{}", probs.p.len()),
        });
    }
    let r = sample_size(n, probs.beta, epsilon, delta)?;
    let sampling = draw_sampling_matrix(probs, r, seed)?;
    solve_with_sampling(a, b, sampling, seed)
}

/// Same as [`underls_solve`] with a caller-supplied sampling matrix.
pub fn solve_with_sampling(
    a: &DenseMatrix,
    b: &[f64],
    sampling: SamplingMatrix,
    seed: u64,
) -> Result<UnderlsSolution> {
    check_system(a, b)?;
    let n = a.rows();
    let a_rank = thin_svd(a, DEFAULT_RANK_TOLERANCE)?.rank();
    if a_rank < n {
        return Err(Error::RankDeficient {
            rank: a_rank,
            required: n,
        });
    }
    let as_ = sampling.right_apply(a)?;
    let svd = thin_svd(&as_, DEFAULT_RANK_TOLERANCE)?;
    if svd.rank() < n {
        return Err(Error::RankDeficient {
            rank: svd.rank(),
            required: n,
        });
    }
    let utb = svd.u.transpose().matvec(b)?;
    let scaled: Vec<f64> = utb
        .iter()
        .zip(&svd.singular_values)
        .map(|(c, s)| c / (s * s))
        .collect();
    let y = svd.u.matvec(&scaled)?;
    let x = a.transpose().matvec(&y)?;
    let ax = a.matvec(&x)?;
    let residual_norm = ax
        .iter()
        .zip(b)
        .map(|(u, v)| (u - v) * (u - v))
        .sum::<f64>()
        .sqrt();
    Ok(UnderlsSolution {
        x,
        r: sampling.r,
        residual_norm,
        seed,
        sampling: Some(sampling),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnLeverage {
    Exact,
    Sketched,
}

/// Column probabilities from the leverage of `Aᵀ`.
///
/// The sketched route uses `plan` (or a practical plan at ε = 0.5 when none is
/// given) and reports `β = (1 − ε)/(1 + ε)`.
pub fn leverage_probs_for_columns(
    a: &DenseMatrix,
    method: ColumnLeverage,
    plan: Option<&SketchPlan>,
    seed: Option<u64>,
) -> Result<SamplingProbabilities> {
    let (n, d) = a.shape();
    if a.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if n >= d {
        return Err(Error::ShapeError(format!(
            "column probabilities need n < d, got {n} x {d}"
        )));
    }
    let at = a.transpose();
    let (scores, beta) = match method {
        ColumnLeverage::Exact => (exact_leverage(&at)?.scores, 1.0),
        ColumnLeverage::Sketched => {
            let plan = match plan {
                Some(p) => p.clone(),
                None => SketchPlan::practical(d, n, 0.5)?,
            };
            let eps = plan.epsilon;
            let (report, _) = approx_leverage(&at, &plan, seed.unwrap_or(0))?;
            (report.scores, (1.0 - eps) / (1.0 + eps))
        }
    };
    let p = normalize(&scores);
    if p.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroMatrix);
    }
    SamplingProbabilities::new(p, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn dist(x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    fn norm(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn sample_size_formula() {
        let base: f64 = 3840.0;
        let expected = (base * (base / 0.1f64.sqrt()).ln()).ceil() as usize;
        assert_eq!(sample_size(10, 1.0, 0.5, 0.1).unwrap(), expected);
        let mut prev = usize::MAX;
        for i in 1..=50 {
            let r = sample_size(4, 1.0, i as f64 / 100.0, 0.1).unwrap();
            assert!(r < prev);
            prev = r;
        }
        assert!(sample_size(4, 0.0, 0.5, 0.1).is_err());
        assert!(sample_size(4, 1.0, 0.6, 0.1).is_err());
        assert!(sample_size(4, 1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn point_mass_sampling() {
        let mut p = vec![0.0; 9];
        p[5] = 1.0;
        let probs = SamplingProbabilities::new(p, 1.0).unwrap();
        let s = draw_sampling_matrix(&probs, 16, 3).unwrap();
        assert!(s.selected.iter().all(|&i| i == 5));
        assert!(s.weights.iter().all(|&w| (w - 0.25).abs() < 1e-15));
        assert_eq!(s, draw_sampling_matrix(&probs, 16, 3).unwrap());
    }

    #[test]
    fn uniform_frequencies_within_three_sigma() {
        let d = 10;
        let r = 100_000;
        let s = draw_sampling_matrix(&SamplingProbabilities::uniform(d).unwrap(), r, 11).unwrap();
        let mut counts = vec![0usize; d];
        for &i in &s.selected {
            counts[i] += 1;
        }
        let mean = r as f64 / d as f64;
        let sd = (r as f64 * 0.1 * 0.9).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() <= 3.0 * sd, "{c}");
        }
    }

    #[test]
    fn single_row_is_exact() {
        let a = DenseMatrix::from_rows(&[vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.5]]).unwrap();
        let norm_sq: f64 = a.row(0).iter().map(|v| v * v).sum();
        let p: Vec<f64> = a.row(0).iter().map(|v| v * v / norm_sq).collect();
        let probs = SamplingProbabilities::new(p, 1.0).unwrap();
        let b = [2.5];
        let expected: Vec<f64> = a.row(0).iter().map(|v| v * 2.5 / norm_sq).collect();
        for seed in 0..20 {
            for r in [1, 2, 7] {
                let s = draw_sampling_matrix(&probs, r, seed).unwrap();
                let sol = solve_with_sampling(&a, &b, s, seed).unwrap();
                assert!(dist(&sol.x, &expected) <= 1e-14);
            }
        }
    }

    #[test]
    fn orthonormal_rows_give_uniform_probabilities() {
        let a = DenseMatrix::from_fn(3, 8, |i, j| if i == j { 1.0 } else { 0.0 });
        let p = leverage_probs_for_columns(&a, ColumnLeverage::Exact, None, None).unwrap();
        for (j, &v) in p.p.iter().enumerate() {
            let target = if j < 3 { 1.0 / 3.0 } else { 0.0 };
            assert!((v - target).abs() < 1e-14);
        }
        assert_eq!(p.beta, 1.0);
    }

    #[test]
    fn sketched_probabilities_near_exact() {
        let a = fixtures::gaussian(4, 600, 8);
        let exact = leverage_probs_for_columns(&a, ColumnLeverage::Exact, None, None).unwrap();
        let plan = SketchPlan::practical(600, 4, 0.5).unwrap();
        let mut good = 0;
        for seed in 0..10 {
            let s =
                leverage_probs_for_columns(&a, ColumnLeverage::Sketched, Some(&plan), Some(seed))
                    .unwrap();
            assert!((s.p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((s.beta - 1.0 / 3.0).abs() < 1e-15);
            if s.p
                .iter()
                .zip(&exact.p)
                .all(|(x, y)| (x - y).abs() <= 0.5 * y)
            {
                good += 1;
            }
        }
        assert!(good >= 8, "{good}");
    }

    #[test]
    fn random_system_error_bound() {
        let a = fixtures::gaussian(8, 400, 21);
        let b: Vec<f64> = fixtures::gaussian(8, 1, 22).into_vec();
        let x_opt = min_norm_solution(&a, &b).unwrap();
        let probs = leverage_probs_for_columns(&a, ColumnLeverage::Exact, None, None).unwrap();
        let mut ok = 0;
        for seed in 0..10 {
            let sol = underls_solve(&a, &b, &probs, 0.5, 0.1, seed).unwrap();
            if dist(&sol.x, &x_opt) <= norm(&x_opt) {
                ok += 1;
            }
        }
        assert!(ok >= 9);
        assert!(
            min_norm_solution(&a, &b)
                .map(|x| norm(
                    &a.matvec(&x)
                        .unwrap()
                        .iter()
                        .zip(&b)
                        .map(|(u, v)| u - v)
                        .collect::<Vec<_>>()
                ))
                .unwrap()
                < 1e-10
        );
    }

    #[test]
    fn hadamard_rows_relative_error() {
        let a = fixtures::hadamard_columns(256, 4, 5).unwrap().transpose();
        let b = [1.0, -0.5, 0.25, 2.0];
        let x_opt = min_norm_solution(&a, &b).unwrap();
        let probs = leverage_probs_for_columns(&a, ColumnLeverage::Exact, None, None).unwrap();
        for &p in &probs.p {
            assert!((p - 1.0 / 256.0).abs() < 1e-12);
        }
        let sol = underls_solve(&a, &b, &probs, 0.5, 0.1, 3).unwrap();
        assert!(dist(&sol.x, &x_opt) <= 0.5 * norm(&x_opt));
    }

    #[test]
    fn conditional_bound_holds_when_premise_holds() {
        let a = fixtures::gaussian(5, 120, 30);
        let b: Vec<f64> = (0..5).map(|i| (i as f64 - 2.0) * 0.7 + 0.1).collect();
        let x_opt = min_norm_solution(&a, &b).unwrap();
        let svd = thin_svd(&a, DEFAULT_RANK_TOLERANCE).unwrap();
        // orthonormal rows spanning the row space of A
        let v_rows = svd.v.transpose();
        let probs = leverage_probs_for_columns(&a, ColumnLeverage::Exact, None, None).unwrap();
        let eps: f64 = 0.3;
        let mut checked = 0;
        for seed in 0..40 {
            let s = draw_sampling_matrix(&probs, 400, seed).unwrap();
            let vs = s.right_apply(&v_rows).unwrap();
            let sv = crate::matcore::singular_values(&vs).unwrap();
            let premise = sv
                .iter()
                .all(|&x| x >= (1.0 - eps).sqrt() && x <= (1.0 + eps).sqrt());
            let sol = solve_with_sampling(&a, &b, s, seed).unwrap();
            if premise {
                checked += 1;
                assert!(dist(&sol.x, &x_opt) <= 2.0 * eps * norm(&x_opt));
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn errors() {
        let tall = fixtures::gaussian(5, 3, 0);
        let probs = SamplingProbabilities::uniform(3).unwrap();
        assert!(matches!(
            underls_solve(&tall, &[0.0; 5], &probs, 0.5, 0.1, 0),
            Err(Error::ShapeError(_))
        ));
        let dup = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]]).unwrap();
        assert!(matches!(
            underls_solve(&dup, &[1.0, 2.0], &probs, 0.5, 0.1, 0),
            Err(Error::RankDeficient { .. })
        ));
        assert!(SamplingProbabilities::new(vec![0.5, 0.6], 1.0).is_err());
        assert!(SamplingProbabilities::new(vec![0.5, 0.5], 0.0).is_err());
        assert!(SamplingProbabilities::new(vec![1.5, -0.5], 1.0).is_err());
    }
}
