use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use framesub_core::bss::Traversal;
use framesub_core::experiments::{NodeVariant, DEFAULT_SEED};

#[derive(Parser)]
#[command(name = "framesub", version, about = "Well-conditioned subframes of finite frames")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Optimal frame bounds and squared Frobenius norm of a frame.
    Bounds(BoundsArgs),
    /// Select a subframe with one of the sampling strategies.
    Subsample(SubsampleArgs),
    /// Generate Marcinkiewicz-Zygmund nodes for a trigonometric space.
    Nodes(NodesArgs),
    /// Least-squares coefficients from samples at given nodes.
    Recover(RecoverArgs),
    /// Reproduce one of the Fourier-frame experiments.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
pub struct BoundsArgs {
    /// Frame file (CSV, or JSON by extension).
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    RandomWeighted,
    RandomUnweighted,
    Bss,
    BssPerp,
    PlainBss,
    TwoStep,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::RandomWeighted => "random-weighted",
            Strategy::RandomUnweighted => "random-unweighted",
            Strategy::Bss => "bss",
            Strategy::BssPerp => "bss-perp",
            Strategy::PlainBss => "plain-bss",
            Strategy::TwoStep => "two-step",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TraversalArg {
    Sequential,
    RandomPermutation,
    RandomCyclic,
}

impl From<TraversalArg> for Traversal {
    fn from(t: TraversalArg) -> Self {
        match t {
            TraversalArg::Sequential => Traversal::Sequential,
            TraversalArg::RandomPermutation => Traversal::RandomPermutation,
            TraversalArg::RandomCyclic => Traversal::RandomCyclic,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args)]
pub struct SubsampleArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub strategy: Strategy,
    /// Oversampling factor (bss, bss-perp).
    #[arg(long)]
    pub b: Option<f64>,
    /// Target oversampling factor (plain-bss, two-step).
    #[arg(long = "b-prime")]
    pub b_prime: Option<f64>,
    /// Stability factor of the selection test.
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Failure probability of the random strategies.
    #[arg(long, default_value_t = 0.1)]
    pub p: f64,
    /// Relative deviation of the random strategies.
    #[arg(long, default_value_t = 0.5)]
    pub t: f64,
    /// Mixing weight of random-unweighted.
    #[arg(long, default_value_t = 0.5)]
    pub c: f64,
    /// Number of draws instead of the theorem's count (random strategies).
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = TraversalArg::RandomPermutation)]
    pub traversal: TraversalArg,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IndexArg {
    HyperbolicCross,
    FullGrid,
    Random,
}

/// Frequency set of the trigonometric space `V_m`.
#[derive(Args)]
pub struct FrequencyArgs {
    /// Spatial dimension.
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, value_enum, default_value_t = IndexArg::FullGrid)]
    pub index: IndexArg,
    /// Hyperbolic cross parameter.
    #[arg(long)]
    pub r: Option<u64>,
    /// Full grid lower end.
    #[arg(long, allow_hyphen_values = true)]
    pub lo: Option<i64>,
    /// Full grid upper end.
    #[arg(long, allow_hyphen_values = true)]
    pub hi: Option<i64>,
    /// Number of random frequencies.
    #[arg(long)]
    pub count: Option<usize>,
    /// Random frequencies come from `[-h, h]^d`.
    #[arg(long = "half-width")]
    pub half_width: Option<i64>,
    #[arg(long = "freq-seed", default_value_t = DEFAULT_SEED)]
    pub freq_seed: u64,
}

#[derive(Args)]
pub struct NodesArgs {
    #[command(flatten)]
    pub freqs: FrequencyArgs,
    /// Oversampling factor of PlainBSS.
    #[arg(long)]
    pub b: f64,
    #[arg(long, default_value_t = 0.1)]
    pub p: f64,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    pub t: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Redraw candidates until their lower MZ constant reaches 1 - t.
    #[arg(long)]
    pub redraw: bool,
    /// Node CSV (coordinates and weight per row).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional JSON summary of the run.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args)]
pub struct RecoverArgs {
    #[command(flatten)]
    pub freqs: FrequencyArgs,
    /// Node CSV.
    #[arg(long)]
    pub nodes: PathBuf,
    /// Samples CSV with `re,im` per node.
    #[arg(long)]
    pub samples: PathBuf,
    /// Scale rows and samples by the node weights.
    #[arg(long)]
    pub weighted: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    RandomNodes,
    GridStream,
}

impl From<VariantArg> for NodeVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::RandomNodes => NodeVariant::RandomNodes,
            VariantArg::GridStream => NodeVariant::GridStream,
        }
    }
}

#[derive(Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub id: u8,
    /// Oversampling factors; defaults to the published choice for the experiment.
    #[arg(long, value_delimiter = ',')]
    pub b: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Number of frequencies in experiment 3.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, value_enum, default_value_t = VariantArg::RandomNodes)]
    pub variant: VariantArg,
    /// Decline candidate families that cannot be stored densely.
    #[arg(long = "no-streaming")]
    pub no_streaming: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
