//! Argument definitions. Relative paths resolve against
//! `TARNLAB_DATA_DIR` when set; flags always win over config files.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "tarnlab", version, about = "Topic-aware visual storytelling pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic topic-tagged corpus with train/val/test splits.
    Synth(SynthArgs),
    /// Precompute visual and linguistic topics into a sidecar file.
    Topics(TopicsArgs),
    /// Run two-phase training and write a checkpoint plus log.
    Train(TrainArgs),
    /// Decode stories from a checkpoint for a dataset split.
    Generate(GenerateArgs),
    /// Score generated stories and emit a report plus plots.
    Evaluate(EvaluateArgs),
    /// Train and evaluate a grid of reward configurations.
    Ablate(AblateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Adapter {
    /// Deterministic offline embedding/concept fixtures.
    Fixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Greedy,
    Sample,
}

#[derive(Debug, Parser)]
pub struct SynthArgs {
    /// Number of distinct topics.
    #[arg(long)]
    pub topics: usize,
    /// Stories per topic.
    #[arg(long = "per-topic")]
    pub per_topic: usize,
    /// Images (and sentences) per story.
    #[arg(long, default_value_t = 3)]
    pub images: usize,
    /// Target vocabulary budget for the generator.
    #[arg(long, default_value_t = 120)]
    pub vocab: usize,
    /// Embedding dimension of the companion fixture table.
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Output directory for splits, fixture table, and manifest.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Parser)]
pub struct TopicsArgs {
    /// Dataset split to annotate (JSONL).
    #[arg(long)]
    pub data: PathBuf,
    /// Fixture table backing the adapters.
    #[arg(long)]
    pub fixture: PathBuf,
    #[arg(long, value_enum, default_value_t = Adapter::Fixture)]
    pub adapter: Adapter,
    /// Concept blocklist; falls back to the built-in list when absent.
    #[arg(long)]
    pub blocklist: Option<PathBuf>,
    /// Stopword list; falls back to the built-in list when absent.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Output sidecar path (JSONL).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Parser)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Topic sidecar produced by `topics`.
    #[arg(long)]
    pub topics: PathBuf,
    #[arg(long)]
    pub fixture: PathBuf,
    #[arg(long, value_enum, default_value_t = Adapter::Fixture)]
    pub adapter: Adapter,
    /// TOML training config; flags below override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long = "batch-size")]
    pub batch_size: Option<usize>,
    #[arg(long = "mle-epochs")]
    pub mle_epochs: Option<usize>,
    #[arg(long = "mixed-epochs")]
    pub mixed_epochs: Option<usize>,
    #[arg(long = "d-h")]
    pub d_h: Option<usize>,
    #[arg(long = "d-e")]
    pub d_e: Option<usize>,
    #[arg(long = "max-len")]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Parser)]
pub struct GenerateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub fixture: PathBuf,
    #[arg(long, value_enum, default_value_t = Adapter::Fixture)]
    pub adapter: Adapter,
    #[arg(long, value_enum, default_value_t = Mode::Greedy)]
    pub mode: Mode,
    /// Sampling seed; ignored in greedy mode.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long = "max-len", default_value_t = 20)]
    pub max_len: usize,
    /// Output file of generated stories (JSONL).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Parser)]
pub struct EvaluateArgs {
    /// Generated stories (JSONL) from `generate`.
    #[arg(long)]
    pub generated: PathBuf,
    /// Reference dataset split (JSONL).
    #[arg(long)]
    pub data: PathBuf,
    /// Optional JSON object of externally computed scores to merge.
    #[arg(long)]
    pub external: Option<PathBuf>,
    /// Optional train log; enables the reward-curve plot.
    #[arg(long = "train-log")]
    pub train_log: Option<PathBuf>,
    /// Output directory for report and plots.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Grid {
    /// Reward-combination rows: baseline, bleu, bleu+cv, bleu+cl, full.
    Table3,
    /// Six (gamma, eta) pairs with gamma + eta = 1, gamma 0.3..0.8.
    Table4,
}

#[derive(Debug, Parser)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Held-out split for scoring each cell.
    #[arg(long = "eval-data")]
    pub eval_data: PathBuf,
    #[arg(long)]
    pub topics: PathBuf,
    #[arg(long)]
    pub fixture: PathBuf,
    #[arg(long, value_enum, default_value_t = Adapter::Fixture)]
    pub adapter: Adapter,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub grid: Grid,
    /// Seeds shared across all grid cells.
    #[arg(long, value_delimiter = ',', default_value = "7")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub out: PathBuf,
}
