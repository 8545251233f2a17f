use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "capcomp",
    version,
    about = "Train and evaluate image-caption quality scorers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a dataset and summarize it.
    Ingest(IngestArgs),
    /// Write a synthetic dataset with a known latent score.
    Synth(SynthArgs),
    /// Sample comparison pairs.
    GenPairs(GenPairsArgs),
    /// Train the regression scorer on direct ratings.
    TrainReg(TrainArgs),
    /// Train the comparative scorer on pairs.
    TrainPair(TrainPairArgs),
    /// Score the test split with a saved checkpoint.
    Eval(EvalArgs),
    /// Correlation of the comparative model as a function of N.
    SweepN(SweepArgs),
    /// Repeated same-image runs with 50/50 pair splits.
    SameImage(SameImageArgs),
    /// Inter-annotator agreement for a response table.
    Agreement(AgreementArgs),
    /// Run the annotation service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset JSONL.
    #[arg(long)]
    pub data: PathBuf,
    /// PREMB1 embedding store referenced by `embedding_row`.
    #[arg(long, requires = "image_dim")]
    pub store: Option<PathBuf>,
    /// Image feature columns at the start of each store row.
    #[arg(long)]
    pub image_dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// `key = value` training configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Also write the dataset back out as inline JSONL.
    #[arg(long)]
    pub export: Option<PathBuf>,
    /// JSON summary.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Several captions per image (defaults to 300 images x 4 captions).
    #[arg(long)]
    pub multi_caption: bool,
    #[arg(long)]
    pub images: Option<usize>,
    #[arg(long)]
    pub captions: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenPairsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Opponents per item.
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// All same-image caption pairs instead of random opponents.
    #[arg(long, conflicts_with = "n")]
    pub same_image: bool,
    /// Sample over every item, not just the training split.
    #[arg(long)]
    pub all_items: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// JSON training report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainPairArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Pair list; sampled from the training split when absent.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Opponents per item when sampling.
    #[arg(long, default_value_t = 20)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Also report pairwise accuracy on these pairs.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Evaluate every item rather than the test split.
    #[arg(long)]
    pub all_items: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 5, 10, 20])]
    pub n_values: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [0])]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SameImageArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value_t = 7)]
    pub runs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct AgreementSource {
    /// Response table CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// One of the bundled study tasks (1, 2 or 3).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub study: Option<u8>,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    #[command(flatten)]
    pub source: AgreementSource,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Policy {
    Replace,
    Reject,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub serve_addr: SocketAddr,
    /// Where the response and session logs live.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Question bank JSON files; the bundled study banks when omitted.
    #[arg(long = "bank")]
    pub banks: Vec<PathBuf>,
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    #[arg(long)]
    pub media_dir: Option<PathBuf>,
    /// Second session for the same rater and task.
    #[arg(long, value_enum, default_value_t = Policy::Reject)]
    pub session_policy: Policy,
}
