//! Argument definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::io::MatrixFormat;

#[derive(Debug, Parser)]
#[command(
    name = "levsketch",
    version,
    about = "Fast approximate leverage scores and related sketches"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalArgs {
    /// Base seed; retries use seed + 1, seed + 2, ...
    #[arg(long, global = true, env = "LEVSKETCH_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Worker threads; 1 is the bitwise reference (results are identical for any value).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Extra attempts after a rank-deficient sketch.
    #[arg(long, global = true, default_value_t = 3)]
    pub retries: u32,

    /// Output file; stdout when omitted.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    /// Defaults to CSV for `bench` and JSON otherwise.
    #[arg(long, global = true, value_enum)]
    pub output_format: Option<OutputFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Approximate leverage scores of a tall matrix.
    Leverage(LeverageArgs),
    /// Exact leverage scores.
    Exact(InputArgs),
    /// Largest leverage score.
    Coherence(CoherenceArgs),
    /// Heavy cross-leverage pairs.
    Cross(CrossArgs),
    /// Normalized rank-k leverage scores of a general matrix.
    Rankk(RankkArgs),
    /// Sampled solution of an under-constrained least-squares problem.
    Underls(UnderlsArgs),
    /// Exact vs sketched timing and accuracy over a size grid (CSV).
    Bench(BenchArgs),
    /// Write a seeded test matrix.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Matrix file.
    pub input: PathBuf,

    /// Input format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<MatrixFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Theory,
    Practical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FirstStage {
    Srht,
    FullRht,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SecondStage {
    SparseJlt,
    Gaussian,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Ortho {
    Svd,
    Qr,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SketchArgs {
    #[arg(long = "eps", default_value_t = 0.5)]
    pub epsilon: f64,

    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,

    #[arg(long, value_enum, default_value_t = Mode::Practical)]
    pub mode: Mode,

    #[arg(long, default_value_t = levsketch::sketch::DEFAULT_C1)]
    pub c1: f64,

    #[arg(long, default_value_t = levsketch::sketch::DEFAULT_C2)]
    pub c2: f64,

    /// First-stage row count.
    #[arg(long)]
    pub r1: Option<usize>,

    /// Second-stage projection dimension.
    #[arg(long)]
    pub r2: Option<usize>,

    #[arg(long, value_enum)]
    pub pi1: Option<FirstStage>,

    #[arg(long, value_enum)]
    pub pi2: Option<SecondStage>,

    #[arg(long, value_enum, default_value_t = Ortho::Svd)]
    pub ortho: Ortho,

    /// Drop directions below the rank tolerance instead of failing.
    #[arg(long)]
    pub truncate_rank: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Two-stage Hadamard and JL sketch.
    Fast,
    /// Row-sampled Hadamard estimator with a floor.
    Mi,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LeverageArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub sketch: SketchArgs,

    #[arg(long, value_enum, default_value_t = Estimator::Fast)]
    pub estimator: Estimator,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CoherenceArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub sketch: SketchArgs,

    /// Use exact leverage scores.
    #[arg(long)]
    pub exact: bool,
}

/// κ as a number or `nlogn` (κ = n ln n).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kappa {
    Value(f64),
    NLogN,
}

impl Serialize for Kappa {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Kappa::Value(v) => s.serialize_f64(*v),
            Kappa::NLogN => s.serialize_str("nlogn"),
        }
    }
}

impl Cli {
    pub fn output_format(&self) -> OutputFormat {
        self.global.output_format.unwrap_or(match self.command {
            Command::Bench(_) => OutputFormat::Csv,
            _ => OutputFormat::Json,
        })
    }
}

impl Kappa {
    pub fn resolve(self, n: usize) -> f64 {
        match self {
            Kappa::Value(v) => v,
            Kappa::NLogN => n as f64 * (n as f64).ln(),
        }
    }
}

pub fn parse_kappa(s: &str) -> Result<Kappa, String> {
    if s.eq_ignore_ascii_case("nlogn") {
        return Ok(Kappa::NLogN);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 1.0 => Ok(Kappa::Value(v)),
        _ => Err(format!("expected a number > 1 or 'nlogn', got {s:?}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Inflation {
    /// κ · ‖ΩᵀΩ‖_F² / d
    Normalized,
    /// κ · (1 + 30 d ε)
    WorstCase,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CrossArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub sketch: SketchArgs,

    #[arg(long, value_parser = parse_kappa, default_value = "nlogn")]
    pub kappa: Kappa,

    #[arg(long, value_enum, default_value_t = Inflation::Normalized)]
    pub inflation: Inflation,

    /// Omit diagonal pairs (i, i).
    #[arg(long)]
    pub off_diagonal_only: bool,

    /// Search the exact orthonormal basis instead of the sketch.
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    Spectral,
    Frobenius,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RankkArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[arg(long)]
    pub k: usize,

    #[arg(long = "eps", default_value_t = 0.5)]
    pub epsilon: f64,

    #[arg(long, value_enum, default_value_t = Norm::Frobenius)]
    pub norm: Norm,

    /// Power-iteration depth for the spectral path.
    #[arg(long)]
    pub q: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbSource {
    Exact,
    Sketched,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct UnderlsArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Right-hand side vector (single row or column).
    #[arg(long)]
    pub rhs: PathBuf,

    #[arg(long, value_enum)]
    pub rhs_format: Option<MatrixFormat>,

    #[arg(long = "eps", default_value_t = 0.5)]
    pub epsilon: f64,

    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,

    #[arg(long, value_enum, default_value_t = ProbSource::Exact)]
    pub probs: ProbSource,

    /// Override the β used to size the sample.
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    /// Row counts.
    #[arg(long, value_delimiter = ',', default_values_t = [1024usize, 2048, 4096, 8192, 16384])]
    pub n: Vec<usize>,

    /// Column counts.
    #[arg(long, value_delimiter = ',', default_values_t = [8usize, 16, 32, 64])]
    pub d: Vec<usize>,

    #[arg(long, default_value_t = 3)]
    pub trials: usize,

    #[arg(long = "eps", default_value_t = 0.5)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fixture {
    Gaussian,
    Spiked,
    Hadamard,
    Planted,
    LowRank,
    Canonical,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub kind: Fixture,

    #[arg(long)]
    pub n: usize,

    #[arg(long)]
    pub d: usize,

    /// Rank for `low-rank`.
    #[arg(long, default_value_t = 2)]
    pub rank: usize,

    /// Number of scaled rows for `spiked`.
    #[arg(long, default_value_t = 2)]
    pub spikes: usize,

    #[arg(long, default_value_t = 100.0)]
    pub magnitude: f64,

    /// Planted pair for `planted`.
    #[arg(long, num_args = 2, value_names = ["I", "J"], default_values_t = [3usize, 7])]
    pub pair: Vec<usize>,

    /// Format of the written file; guessed from the output extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<MatrixFormat>,
}
