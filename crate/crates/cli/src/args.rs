use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "mcptest", version, about = "Multiple-comparison significance testing for IR evaluation")]
pub struct Cli {
    /// Flat `key = value` file supplying defaults for the subcommand's flags.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Suppress progress messages on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score runs against qrels into a topic x system matrix.
    Score(ScoreArgs),
    /// Fit per-topic logistic regressors for one run.
    Fit(FitArgs),
    /// Run a simulation scenario and report FWER or power.
    Simulate(SimulateArgs),
    /// Run one test and adjustment over a score matrix.
    Test(TestArgs),
    /// Estimate average power by subsampling topics of a full matrix.
    Subsample(SubsampleArgs),
    /// Mark system pairs of a full matrix as different or undecided.
    Truth(TruthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output path, `-` for stdout.
    #[arg(long, default_value = "-")]
    pub out: String,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SeedArg {
    #[arg(long, env = "MCPTEST_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    /// ap or ndcg.
    #[arg(long, default_value = "ap")]
    pub metric: String,

    #[arg(long, default_value_t = 1000)]
    pub depth: usize,
}

#[derive(Debug, Args)]
pub struct TestOptions {
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// exact, approx or auto.
    #[arg(long, default_value = "auto")]
    pub wilcoxon_mode: String,

    /// Permutation rounds for the randomised Tukey test.
    #[arg(long, default_value_t = 100_000)]
    pub permutations: u64,

    /// Report (count + 1) / (B + 1) for the randomised Tukey test.
    #[arg(long)]
    pub smoothed: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Run files, one system each.
    #[arg(long = "run", required = true, num_args = 1..)]
    pub runs: Vec<PathBuf>,

    #[arg(long)]
    pub qrels: PathBuf,

    #[command(flatten)]
    pub metric: MetricArgs,

    /// Relevant-count denominator: qrels or retrieved.
    #[arg(long, default_value = "qrels")]
    pub denominator: String,

    #[arg(long, default_value = "-")]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub run: PathBuf,

    #[arg(long)]
    pub qrels: PathBuf,

    #[arg(long, default_value_t = 1000)]
    pub depth: usize,

    #[arg(long, default_value = "-")]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Regressor bank CSV; a synthetic bank is generated when omitted.
    #[arg(long)]
    pub bank: Option<PathBuf>,

    /// null (all pairs equal) or alt (all pairs differ).
    #[arg(long)]
    pub scenario: String,

    #[arg(long)]
    pub m: usize,

    #[arg(long)]
    pub n: usize,

    #[arg(long, default_value_t = 1000)]
    pub reps: u64,

    #[arg(long, default_value_t = 0)]
    pub first_rep: u64,

    /// Comma-separated perturbation proportions for systems 2..=m.
    #[arg(long, value_delimiter = ',')]
    pub props: Option<Vec<f64>>,

    /// Sampled ranking length (default: the bank's rank size).
    #[arg(long)]
    pub rank_size: Option<usize>,

    #[command(flatten)]
    pub metric: MetricArgs,

    /// Relevant-count denominator: retrieved or qrels.
    #[arg(long, default_value = "retrieved")]
    pub denominator: String,

    /// Comma-separated `test+adjustment` list (default: all).
    #[arg(long, value_delimiter = ',')]
    pub tests: Option<Vec<String>>,

    #[command(flatten)]
    pub options: TestOptions,

    /// Topics in the generated bank when --bank is omitted.
    #[arg(long, default_value_t = 50)]
    pub synthetic_topics: usize,

    #[command(flatten)]
    pub seed: SeedArg,

    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long)]
    pub matrix: PathBuf,

    /// t, wilcoxon, tukey or rtukey.
    #[arg(long)]
    pub test: String,

    /// none, bonferroni, holm, bh or by.
    #[arg(long, default_value = "none")]
    pub adjust: String,

    #[command(flatten)]
    pub options: TestOptions,

    #[command(flatten)]
    pub seed: SeedArg,

    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SubsampleArgs {
    #[arg(long)]
    pub matrix: PathBuf,

    /// Comma-separated topic subset sizes.
    #[arg(long, required = true, value_delimiter = ',')]
    pub sizes: Vec<usize>,

    #[arg(long, default_value_t = 2000)]
    pub iters: u64,

    #[arg(long, default_value_t = 0.0005)]
    pub gamma: f64,

    /// Label of the matrix's metric in the report.
    #[arg(long, default_value = "ap")]
    pub metric: String,

    /// Comma-separated `test+adjustment` list (default: all).
    #[arg(long, value_delimiter = ',')]
    pub tests: Option<Vec<String>>,

    #[command(flatten)]
    pub options: TestOptions,

    #[command(flatten)]
    pub seed: SeedArg,

    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct TruthArgs {
    #[arg(long)]
    pub matrix: PathBuf,

    #[arg(long, default_value_t = 0.0005)]
    pub gamma: f64,

    #[arg(long, default_value = "-")]
    pub out: String,
}
