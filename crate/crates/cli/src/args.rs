use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "sdc-hawkes", version, about = "Hawkes process learning from short doubly-censored event sequences")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TruthArg {
    Invariant,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BasisArg {
    Constant,
    Gaussian,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a ground truth and simulate complete sequences from it.
    Simulate(SimulateArgs),
    /// Keep one random interval of every sequence.
    Censor(CensorArgs),
    /// Synthesize weighted long sequences by sampling-stitching.
    Stitch(StitchArgs),
    /// Fit a Hawkes model.
    Fit(FitArgs),
    /// Held-out log-likelihood and, given a truth, relative error.
    Eval(EvalArgs),
    /// Repeat the synthetic comparison of training regimes.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub truth: TruthArg,
    #[arg(long, default_value_t = 2)]
    pub types: usize,
    #[arg(long, num_args = 2, value_names = ["BEGIN", "END"], default_values_t = [0.0, 50.0])]
    pub window: Vec<f64>,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sequence file; the truth goes next to it with extension `.truth.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CensorArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub intervals: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct StitchOptions {
    /// Similarity bandwidth σ_s.
    #[arg(long, default_value_t = 1.0)]
    pub sigma_s: f64,
    /// Stitches per direction (L).
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    /// Stitched sequences per origin (U).
    #[arg(long, default_value_t = 5)]
    pub replicates: usize,
    #[arg(long)]
    pub use_features: bool,
    #[arg(long)]
    pub allow_overlap: bool,
    /// Infer missing windows from the first and last event.
    #[arg(long)]
    pub endpoint_fallback: bool,
}

#[derive(Debug, Args)]
pub struct StitchArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub stitch: StitchOptions,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct LearnerOptions {
    /// L1 weight γ.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Convergence threshold V on the change of A.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho0: f64,
    #[arg(long, default_value_t = 1.5)]
    pub rho_growth: f64,
    #[arg(long, default_value_t = 1e6)]
    pub rho_cap: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    /// Kernel decay β.
    #[arg(long, default_value_t = 0.2)]
    pub beta: f64,
    /// Basis family; `experiment` picks one from the truth when omitted.
    #[arg(long, value_enum)]
    pub basis: Option<BasisArg>,
    /// Number of Gaussian basis functions (M).
    #[arg(long, default_value_t = 8)]
    pub basis_count: usize,
    /// Gaussian bandwidth σ_κ (default: squared center spacing).
    #[arg(long)]
    pub sigma_kappa: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub learner: LearnerOptions,
    /// Span of the Gaussian centers (default: the data's span).
    #[arg(long, num_args = 2, value_names = ["BEGIN", "END"])]
    pub basis_window: Option<Vec<f64>>,
    /// Number of event types (default: largest type in the data).
    #[arg(long)]
    pub types: Option<usize>,
    /// Ignore stored weights.
    #[arg(long)]
    pub unweighted: bool,
    #[arg(long)]
    pub endpoint_fallback: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Ground truth written by `simulate`, for the relative error.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Per-sequence CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON summary (default: `<out>` with extension `.summary.json`).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, value_enum)]
    pub truth: TruthArg,
    #[arg(long, default_value_t = 2)]
    pub types: usize,
    #[arg(long, num_args = 2, value_names = ["BEGIN", "END"], default_values_t = [0.0, 50.0])]
    pub window: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    pub train: usize,
    #[arg(long, default_value_t = 100)]
    pub test: usize,
    #[arg(long, default_value_t = 10)]
    pub intervals: usize,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Comma-separated: complete, sdc_direct, stitched (at --depth) or
    /// stitched_L<k>.
    #[arg(long, default_value = "complete,sdc_direct,stitched")]
    pub regimes: String,
    #[command(flatten)]
    pub stitch: StitchOptions,
    #[command(flatten)]
    pub learner: LearnerOptions,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-trial CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON summary (default: `<out>` with extension `.summary.json`).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}
