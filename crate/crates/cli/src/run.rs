//! Command execution and output documents.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use levsketch::crosslev::{approx_cross_leverage_with, heavy_pairs, HeavyPairSet, KappaInflation};
use levsketch::fixtures;
use levsketch::levscore::{approx_leverage_with, mi_estimate, LeverageOptions, OrthoSource};
use levsketch::matcore::{exact_leverage, orthonormal_basis, DenseMatrix};
use levsketch::rankklev::{frobenius_rankk_with, spectral_rankk_with, RankKPlan};
use levsketch::underls::{leverage_probs_for_columns, underls_solve, ColumnLeverage};
use levsketch::{LeverageReport, SketchKind, SketchPlan};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::cli::*;
use crate::io::{self, MatrixFormat};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("sketch stayed rank deficient after {attempts} attempts: {last}")]
    RetriesExhausted {
        attempts: u32,
        last: levsketch::Error,
    },
    #[error(transparent)]
    Library(#[from] levsketch::Error),
    #[error(transparent)]
    Io(#[from] io::IoError),
    #[error("{0}")]
    Usage(String),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::RetriesExhausted { .. } => 2,
            _ => 1,
        }
    }
}

pub type RunResult<T> = std::result::Result<T, RunError>;

/// A finished run: the JSON document and, when it has a natural table form, CSV rows.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub document: Value,
    pub csv: String,
}

impl Outcome {
    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => {
                let mut s = serde_json::to_string_pretty(&self.document).expect("serializable");
                s.push('\n');
                s
            }
            OutputFormat::Csv => self.csv.clone(),
        }
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn document(params: Value, seed: u64, timings: Value, result: Value) -> Value {
    json!({
        "params": params,
        "seed": seed,
        "timings_ms": timings,
        "result": result,
    })
}

fn load(input: &InputArgs) -> RunResult<DenseMatrix> {
    let format = input
        .format
        .unwrap_or_else(|| MatrixFormat::from_path(&input.input));
    Ok(io::load_matrix(&input.input, format)?)
}

fn input_params(input: &InputArgs) -> Value {
    let format = input
        .format
        .unwrap_or_else(|| MatrixFormat::from_path(&input.input));
    json!({ "input": input.input.display().to_string(), "format": format })
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        for (k, v) in e {
            b.insert(k, v);
        }
    }
    base
}

/// Runs `f` with seed, seed + 1, ... while it fails with a retryable error.
fn with_retries<T>(
    global: &GlobalArgs,
    mut f: impl FnMut(u64) -> levsketch::Result<T>,
) -> RunResult<(T, u64, u32)> {
    let mut last = None;
    for attempt in 0..=global.retries {
        let seed = global.seed.wrapping_add(attempt as u64);
        match f(seed) {
            Ok(v) => return Ok((v, seed, attempt + 1)),
            Err(e) if e.is_retryable() => last = Some(e),
            Err(e) => return Err(e.into()),
        }
    }
    Err(RunError::RetriesExhausted {
        attempts: global.retries + 1,
        last: last.expect("at least one attempt"),
    })
}

pub fn build_plan(args: &SketchArgs, n: usize, d: usize) -> levsketch::Result<SketchPlan> {
    let mut plan = match args.mode {
        Mode::Practical => {
            SketchPlan::practical_with(n, d, args.epsilon, args.delta, args.c1, args.c2)?
        }
        Mode::Theory => SketchPlan::theory(n, d, args.epsilon, args.delta)?,
    };
    if let Some(r1) = args.r1 {
        plan = plan.with_r1(r1)?;
    }
    if let Some(pi1) = args.pi1 {
        plan = plan.with_fjlt(match pi1 {
            FirstStage::Srht => SketchKind::Srht,
            FirstStage::FullRht => SketchKind::FullRht,
        })?;
    }
    if let Some(pi2) = args.pi2 {
        plan = plan.with_jlt(match pi2 {
            SecondStage::SparseJlt => SketchKind::SparseJlt,
            SecondStage::Gaussian => SketchKind::Gaussian,
            SecondStage::Identity => SketchKind::Identity,
        })?;
    }
    if let Some(r2) = args.r2 {
        plan = plan.with_r2(r2)?;
    }
    Ok(plan)
}

fn options(args: &SketchArgs) -> LeverageOptions {
    LeverageOptions {
        ortho: match args.ortho {
            Ortho::Svd => OrthoSource::Svd,
            Ortho::Qr => OrthoSource::Qr,
        },
        truncate_rank: args.truncate_rank,
    }
}

fn sketch_params(args: &SketchArgs, plan: &SketchPlan) -> Value {
    json!({
        "epsilon": args.epsilon,
        "delta": args.delta,
        "mode": args.mode,
        "ortho": args.ortho,
        "truncate_rank": args.truncate_rank,
        "plan": plan,
    })
}

fn global_params(command: &str, global: &GlobalArgs, attempts: u32) -> Value {
    json!({
        "command": command,
        "requested_seed": global.seed,
        "attempts": attempts,
        "retries": global.retries,
    })
}

fn scores_csv(header: &str, values: &[f64]) -> String {
    let mut out = format!("index,{header}\n");
    for (i, v) in values.iter().enumerate() {
        writeln!(out, "{i},{v:?}").unwrap();
    }
    out
}

fn score_result(report: &LeverageReport) -> Value {
    json!({
        "scores": report.scores,
        "coherence": report.coherence,
        "rank": report.rank,
        "method": report.method,
    })
}

pub fn run(cli: &Cli) -> RunResult<Outcome> {
    let g = &cli.global;
    match &cli.command {
        Command::Leverage(args) => leverage(g, args),
        Command::Exact(args) => exact(g, args),
        Command::Coherence(args) => coherence(g, args),
        Command::Cross(args) => cross(g, args),
        Command::Rankk(args) => rankk(g, args),
        Command::Underls(args) => underls(g, args),
        Command::Bench(args) => bench(g, args),
        Command::Gen(args) => gen(g, args),
    }
}

fn sketched_scores(
    g: &GlobalArgs,
    a: &DenseMatrix,
    sketch: &SketchArgs,
    estimator: Estimator,
) -> RunResult<(LeverageReport, Value, Value, u64, u32)> {
    let start = Instant::now();
    match estimator {
        Estimator::Fast => {
            let plan = build_plan(sketch, a.rows(), a.cols())?;
            let opts = options(sketch);
            let ((report, basis), seed, attempts) =
                with_retries(g, |s| approx_leverage_with(a, &plan, s, opts))?;
            let t = basis.timings;
            let timings = json!({
                "sketch_apply": t.sketch_apply,
                "factorization": t.factorization,
                "product": t.product,
                "norms": t.norms,
                "total": ms_since(start),
            });
            let params = merge(
                sketch_params(sketch, &plan),
                json!({ "estimator": estimator }),
            );
            Ok((report, params, timings, seed, attempts))
        }
        Estimator::Mi => {
            let (report, seed, attempts) = with_retries(g, |s| mi_estimate(a, s))?;
            let params = json!({
                "estimator": estimator,
                "sketch_rows": levsketch::levscore::mi_sketch_rows(a.rows(), a.cols()),
            });
            Ok((
                report,
                params,
                json!({ "total": ms_since(start) }),
                seed,
                attempts,
            ))
        }
    }
}

fn leverage(g: &GlobalArgs, args: &LeverageArgs) -> RunResult<Outcome> {
    let a = load(&args.input)?;
    let (report, params, timings, seed, attempts) =
        sketched_scores(g, &a, &args.sketch, args.estimator)?;
    let params = merge(
        merge(
            global_params("leverage", g, attempts),
            input_params(&args.input),
        ),
        params,
    );
    Ok(Outcome {
        csv: scores_csv("score", &report.scores),
        document: document(params, seed, timings, score_result(&report)),
    })
}

fn exact(g: &GlobalArgs, args: &InputArgs) -> RunResult<Outcome> {
    let a = load(args)?;
    let start = Instant::now();
    let report = exact_leverage(&a)?;
    let params = merge(global_params("exact", g, 1), input_params(args));
    Ok(Outcome {
        csv: scores_csv("score", &report.scores),
        document: document(
            params,
            g.seed,
            json!({ "total": ms_since(start) }),
            score_result(&report),
        ),
    })
}

fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
            if v > best.1 {
                (i, v)
            } else {
                best
            }
        })
        .0
}

fn coherence(g: &GlobalArgs, args: &CoherenceArgs) -> RunResult<Outcome> {
    let a = load(&args.input)?;
    let (report, params, timings, seed, attempts) = if args.exact {
        let start = Instant::now();
        let r = exact_leverage(&a)?;
        (
            r,
            json!({ "exact": true }),
            json!({ "total": ms_since(start) }),
            g.seed,
            1,
        )
    } else {
        let (r, p, t, s, n) = sketched_scores(g, &a, &args.sketch, Estimator::Fast)?;
        (r, merge(p, json!({ "exact": false })), t, s, n)
    };
    let params = merge(
        merge(
            global_params("coherence", g, attempts),
            input_params(&args.input),
        ),
        params,
    );
    let i = argmax(&report.scores);
    Ok(Outcome {
        csv: format!("coherence,argmax\n{:?},{i}\n", report.coherence),
        document: document(
            params,
            seed,
            timings,
            json!({ "coherence": report.coherence, "argmax": i, "method": report.method }),
        ),
    })
}

fn pairs_result(set: &HeavyPairSet, kappa: f64) -> Value {
    let pairs: Vec<Value> = set
        .pairs
        .iter()
        .map(|p| json!([p.i, p.j, p.c_sq]))
        .collect();
    json!({
        "pairs": pairs,
        "count": set.len(),
        "threshold": set.threshold,
        "kappa": kappa,
        "kappa_effective": set.kappa,
        "gram_fro_sq": set.gram_fro_sq,
        "candidates": set.candidates,
    })
}

fn cross(g: &GlobalArgs, args: &CrossArgs) -> RunResult<Outcome> {
    let a = load(&args.input)?;
    let kappa = args.kappa.resolve(a.rows());
    if !(kappa.is_finite() && kappa > 1.0) {
        return Err(levsketch::Error::InvalidKappa(kappa).into());
    }
    let start = Instant::now();
    let (set, params, timings, seed, attempts) = if args.exact {
        let u = orthonormal_basis(&a, levsketch::matcore::DEFAULT_RANK_TOLERANCE)?;
        let set = heavy_pairs(&u, kappa)?;
        (
            set,
            json!({ "exact": true }),
            json!({ "total": ms_since(start) }),
            g.seed,
            1,
        )
    } else {
        let plan = build_plan(&args.sketch, a.rows(), a.cols())?;
        let inflation = match args.inflation {
            Inflation::Normalized => KappaInflation::Normalized,
            Inflation::WorstCase => KappaInflation::WorstCase,
        };
        let ((set, basis), seed, attempts) = with_retries(g, |s| {
            approx_cross_leverage_with(&a, &plan, kappa, s, inflation)
        })?;
        let t = basis.timings;
        let timings = json!({
            "sketch_apply": t.sketch_apply,
            "factorization": t.factorization,
            "product": t.product,
            "norms": t.norms,
            "total": ms_since(start),
        });
        let params = merge(
            sketch_params(&args.sketch, &plan),
            json!({ "exact": false, "inflation": args.inflation }),
        );
        (set, params, timings, seed, attempts)
    };
    let set = if args.off_diagonal_only {
        set.off_diagonal()
    } else {
        set
    };
    let params = merge(
        merge(
            global_params("cross", g, attempts),
            input_params(&args.input),
        ),
        merge(
            params,
            json!({
                "kappa": args.kappa,
                "kappa_resolved": kappa,
                "off_diagonal_only": args.off_diagonal_only,
            }),
        ),
    );
    let mut csv = String::from("i,j,c_sq\n");
    for p in &set.pairs {
        writeln!(csv, "{},{},{:?}", p.i, p.j, p.c_sq).unwrap();
    }
    Ok(Outcome {
        csv,
        document: document(params, seed, timings, pairs_result(&set, kappa)),
    })
}

fn rankk(g: &GlobalArgs, args: &RankkArgs) -> RunResult<Outcome> {
    let a = load(&args.input)?;
    let (n, d) = a.shape();
    let mut plan = match args.norm {
        Norm::Spectral => RankKPlan::spectral(n, d, args.k, args.epsilon)?,
        Norm::Frobenius => RankKPlan::frobenius(n, d, args.k, args.epsilon)?,
    };
    if let Some(q) = args.q {
        if args.norm == Norm::Frobenius {
            return Err(RunError::Usage(
                "--q applies only to --norm spectral".into(),
            ));
        }
        plan = plan.with_q(q);
    }
    let start = Instant::now();
    let (report, seed, attempts) = with_retries(g, |s| match args.norm {
        Norm::Spectral => spectral_rankk_with(&a, &plan, s),
        Norm::Frobenius => frobenius_rankk_with(&a, &plan, s),
    })?;
    let params = merge(
        merge(
            global_params("rankk", g, attempts),
            input_params(&args.input),
        ),
        json!({
            "k": args.k,
            "epsilon": args.epsilon,
            "norm": args.norm,
            "q": plan.q,
            "r": plan.r,
        }),
    );
    Ok(Outcome {
        csv: scores_csv("p_hat", &report.p_hat),
        document: document(
            params,
            seed,
            json!({ "total": ms_since(start) }),
            json!({
                "p_hat": report.p_hat,
                "k": report.k,
                "beta": report.beta_claim,
            }),
        ),
    })
}

fn underls(g: &GlobalArgs, args: &UnderlsArgs) -> RunResult<Outcome> {
    let a = load(&args.input)?;
    let rhs_format = args
        .rhs_format
        .unwrap_or_else(|| MatrixFormat::from_path(&args.rhs));
    let b = io::load_vector(&args.rhs, rhs_format)?;
    let start = Instant::now();
    let method = match args.probs {
        ProbSource::Exact => ColumnLeverage::Exact,
        ProbSource::Sketched => ColumnLeverage::Sketched,
    };
    let run_once = |s: u64| {
        let plan = match method {
            ColumnLeverage::Exact => None,
            ColumnLeverage::Sketched => {
                Some(SketchPlan::practical(a.cols(), a.rows(), args.epsilon)?)
            }
        };
        let mut probs = leverage_probs_for_columns(&a, method, plan.as_ref(), Some(s))?;
        if let Some(beta) = args.beta {
            probs.beta = beta;
            probs.validate()?;
        }
        let sol = underls_solve(&a, &b, &probs, args.epsilon, args.delta, s)?;
        Ok((sol, probs.beta))
    };
    let ((sol, beta), seed, attempts) = with_retries(g, run_once)?;
    let params = merge(
        merge(
            global_params("underls", g, attempts),
            input_params(&args.input),
        ),
        json!({
            "rhs": args.rhs.display().to_string(),
            "epsilon": args.epsilon,
            "delta": args.delta,
            "probs": args.probs,
            "beta": beta,
            "r": sol.r,
        }),
    );
    Ok(Outcome {
        csv: scores_csv("x", &sol.x),
        document: document(
            params,
            seed,
            json!({ "total": ms_since(start) }),
            json!({ "x": sol.x, "r": sol.r, "residual_norm": sol.residual_norm }),
        ),
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// One row of the benchmark table.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub d: usize,
    pub exact_ms: f64,
    pub sketched_ms: f64,
    /// Median over trials of the largest relative score error.
    pub max_rel_err: f64,
    /// Fraction of trials with every relative error at most ε.
    pub pass_fraction: f64,
}

pub fn max_relative_error(approx: &[f64], exact: &[f64]) -> f64 {
    approx
        .iter()
        .zip(exact)
        .filter(|(_, &e)| e > 0.0)
        .map(|(a, e)| (a - e).abs() / e)
        .fold(0.0, f64::max)
}

pub fn bench_cell(
    n: usize,
    d: usize,
    trials: usize,
    epsilon: f64,
    seed: u64,
) -> RunResult<BenchRow> {
    let a = fixtures::gaussian(n, d, seed ^ ((n as u64) << 20) ^ d as u64);
    let start = Instant::now();
    let exact = exact_leverage(&a)?;
    let exact_ms = ms_since(start);
    let plan = SketchPlan::practical(n, d, epsilon)?;
    let mut times = Vec::with_capacity(trials);
    let mut errors = Vec::with_capacity(trials);
    for t in 0..trials.max(1) {
        let start = Instant::now();
        let (report, _) = approx_leverage_with(
            &a,
            &plan,
            seed.wrapping_add(t as u64),
            LeverageOptions::default(),
        )?;
        times.push(ms_since(start));
        errors.push(max_relative_error(&report.scores, &exact.scores));
    }
    let passed = errors.iter().filter(|&&e| e <= epsilon).count();
    Ok(BenchRow {
        n,
        d,
        exact_ms,
        sketched_ms: median(&mut times),
        pass_fraction: passed as f64 / errors.len() as f64,
        max_rel_err: median(&mut errors),
    })
}

fn bench(g: &GlobalArgs, args: &BenchArgs) -> RunResult<Outcome> {
    let mut rows = Vec::new();
    for &n in &args.n {
        for &d in &args.d {
            if d >= n {
                continue;
            }
            rows.push(bench_cell(n, d, args.trials, args.epsilon, g.seed)?);
        }
    }
    let mut csv = String::from("n,d,exact_ms,sketched_ms,max_rel_err,pass_fraction\n");
    for r in &rows {
        writeln!(
            csv,
            "{},{},{:.3},{:.3},{:?},{:?}",
            r.n, r.d, r.exact_ms, r.sketched_ms, r.max_rel_err, r.pass_fraction
        )
        .unwrap();
    }
    let params = merge(
        global_params("bench", g, 1),
        json!({ "n": args.n, "d": args.d, "trials": args.trials, "epsilon": args.epsilon }),
    );
    let errors: Vec<Value> = rows
        .iter()
        .map(|r| json!({ "n": r.n, "d": r.d, "max_rel_err": r.max_rel_err, "pass_fraction": r.pass_fraction }))
        .collect();
    let timings: Vec<Value> = rows
        .iter()
        .map(|r| json!({ "n": r.n, "d": r.d, "exact": r.exact_ms, "sketched": r.sketched_ms }))
        .collect();
    Ok(Outcome {
        csv,
        document: document(
            params,
            g.seed,
            Value::Array(timings),
            json!({ "cells": errors }),
        ),
    })
}

fn gen(g: &GlobalArgs, args: &GenArgs) -> RunResult<Outcome> {
    let path = g
        .output
        .as_deref()
        .ok_or_else(|| RunError::Usage("gen needs --output".into()))?;
    let (n, d, seed) = (args.n, args.d, g.seed);
    let a = match args.kind {
        Fixture::Gaussian => fixtures::gaussian(n, d, seed),
        Fixture::Spiked => fixtures::spiked(n, d, args.spikes, args.magnitude, seed),
        Fixture::Hadamard => fixtures::hadamard_columns(n, d, seed)?,
        Fixture::Planted => {
            let (i, j) = (args.pair[0], args.pair[1]);
            if i >= n || j >= n || i == j {
                return Err(RunError::Usage(format!(
                    "invalid pair ({i}, {j}) for n = {n}"
                )));
            }
            fixtures::planted_pair(n, d, i, j, args.magnitude, seed)
        }
        Fixture::LowRank => fixtures::low_rank(n, d, args.rank, seed),
        Fixture::Canonical => fixtures::canonical_rows(n, d),
    };
    let format = args.format.unwrap_or_else(|| MatrixFormat::from_path(path));
    io::save_matrix(path, &a, format)?;
    let mut params = Map::new();
    params.insert("command".into(), json!("gen"));
    params.insert(
        "fixture".into(),
        serde_json::to_value(args).expect("serializable"),
    );
    Ok(Outcome {
        csv: String::new(),
        document: document(
            Value::Object(params),
            seed,
            json!({}),
            json!({ "path": path.display().to_string(), "rows": n, "cols": d }),
        ),
    })
}

/// Executes a parsed command line and writes its output.
pub fn execute(cli: &Cli) -> RunResult<()> {
    if let Some(threads) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .map_err(|e| RunError::Usage(e.to_string()))?;
    }
    let outcome = run(cli)?;
    if matches!(cli.command, Command::Gen(_)) {
        return Ok(());
    }
    let text = outcome.render(cli.output_format());
    io::write_output(cli.global.output.as_deref().map(Path::new), &text)?;
    Ok(())
}
