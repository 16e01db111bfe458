mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use answerable_core::corpus::{Granularity, ReplyScope};
use answerable_core::neural::Activation;
use clap::{Args, Parser, Subcommand};

use config::{ConfigLayer, RunConfig, SplitName, System};

#[derive(Parser, Debug)]
#[command(
    name = "answerable",
    version,
    about = "Predicts which questions an AMA host will answer"
)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Settings file (.json or .toml); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed for every random choice in the invocation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory receiving all artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Thread dump in JSON Lines form.
    #[arg(long, global = true)]
    threads_file: Option<PathBuf>,
    /// Word embedding table in text form.
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    /// Recorded in the resolved config; execution is single-threaded and
    /// seeded either way.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    deterministic: Option<bool>,
}

impl CommonArgs {
    fn layer(&self) -> ConfigLayer {
        ConfigLayer {
            threads_file: self.threads_file.clone(),
            embeddings: self.embeddings.clone(),
            out: self.out.clone(),
            seed: self.seed,
            deterministic: self.deterministic,
            ..ConfigLayer::default()
        }
    }
}

#[derive(Args, Debug, Default)]
struct DataArgs {
    /// Question corpus produced by ingest (default <out>/questions.jsonl).
    #[arg(long)]
    questions: Option<PathBuf>,
    /// Training split size (default 80% of the corpus).
    #[arg(long)]
    train_size: Option<usize>,
    /// Validation split size (default 10%).
    #[arg(long)]
    valid_size: Option<usize>,
    /// Test split size (default the remainder).
    #[arg(long)]
    test_size: Option<usize>,
    /// Temporal bucket width for uniform ordering: month or year.
    #[arg(long, value_parser = parse_granularity)]
    granularity: Option<Granularity>,
}

impl DataArgs {
    fn fill(&self, layer: &mut ConfigLayer) {
        layer.questions_file = self.questions.clone();
        layer.train_size = self.train_size;
        layer.valid_size = self.valid_size;
        layer.test_size = self.test_size;
        layer.granularity = self.granularity;
    }
}

#[derive(Args, Debug, Default)]
struct ModelArgs {
    /// System to train: context-cnn, baseline-cnn, or logreg.
    #[arg(long, value_enum)]
    system: Option<System>,
    /// Filter multiplier x for the {x, 20x, 60x, 60x, 60x} allocation.
    #[arg(long)]
    filter_x: Option<usize>,
    /// Window width of the single-window baseline.
    #[arg(long)]
    window: Option<usize>,
    /// Filter count of the single-window baseline.
    #[arg(long)]
    filters: Option<usize>,
    /// Maximum question length in tokens; longer questions are truncated.
    #[arg(long)]
    seq_len: Option<usize>,
    /// Filter nonlinearity: relu or tanh.
    #[arg(long, value_parser = parse_activation)]
    activation: Option<Activation>,
    /// Dropout rate on the pooled feature vector during training.
    #[arg(long)]
    dropout: Option<f64>,
    /// Loss weight of the answered class.
    #[arg(long)]
    positive_weight: Option<f64>,
    /// Loss weight of the unanswered class.
    #[arg(long)]
    negative_weight: Option<f64>,
    /// Update embedding rows during training instead of freezing them.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    train_embeddings: Option<bool>,
    /// Optimizer step size.
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Minibatch size.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Upper bound on training epochs.
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Epochs without validation improvement before stopping.
    #[arg(long)]
    patience: Option<usize>,
    /// Independent training runs, each with derived seeds.
    #[arg(long)]
    runs: Option<usize>,
    /// L2 strength for logistic regression.
    #[arg(long)]
    lambda: Option<f64>,
    /// Minimum document frequency for the bag-of-words vocabulary.
    #[arg(long)]
    min_df: Option<usize>,
    /// Presence/absence features instead of counts.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    binary_features: Option<bool>,
}

impl ModelArgs {
    fn fill(&self, layer: &mut ConfigLayer) {
        layer.system = self.system;
        layer.filter_x = self.filter_x;
        layer.window = self.window;
        layer.filters = self.filters;
        layer.seq_len = self.seq_len;
        layer.activation = self.activation;
        layer.dropout = self.dropout;
        layer.positive_weight = self.positive_weight;
        layer.negative_weight = self.negative_weight;
        layer.train_embeddings = self.train_embeddings;
        layer.learning_rate = self.learning_rate;
        layer.batch_size = self.batch_size;
        layer.max_epochs = self.max_epochs;
        layer.patience = self.patience;
        layer.runs = self.runs;
        layer.lambda = self.lambda;
        layer.min_df = self.min_df;
        layer.binary_features = self.binary_features;
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Turn a thread dump into a labeled question corpus.
    Ingest {
        /// Drop threads with fewer first-tier posts than this.
        #[arg(long)]
        min_first_tier: Option<usize>,
        /// Which replies mark a question as answered: direct_children or
        /// subtree.
        #[arg(long, value_parser = parse_reply_scope)]
        reply_scope: Option<ReplyScope>,
    },
    /// Profile unique n-gram growth and the implied filter allocation.
    Ngrams {
        #[command(flatten)]
        data: DataArgs,
        /// Discard n-grams occurring fewer times than this.
        #[arg(long)]
        min_count: Option<u64>,
        /// Filter multiplier x used when printing allocations.
        #[arg(long)]
        filter_x: Option<usize>,
    },
    /// Train a system and save its checkpoint.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Score one split with a checkpoint; print AUC, write the ROC sweep.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        /// Checkpoint to evaluate (default <out>/checkpoint).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Which split to score: train, valid, or test.
        #[arg(long, value_enum)]
        split: Option<SplitName>,
    },
    /// Write one score per input question, in input order.
    Predict {
        #[command(flatten)]
        data: DataArgs,
        /// Checkpoint to score with (default <out>/checkpoint).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Build answered/unanswered question pairs per thread.
    Pairs {
        #[command(flatten)]
        data: DataArgs,
        /// Checkpoint for the agreement report (default <out>/checkpoint
        /// when present).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Sweep single-window models over windows and filter counts.
    Grid {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Window widths to sweep, comma separated.
        #[arg(long, value_delimiter = ',')]
        windows: Option<Vec<usize>>,
        /// Filter counts to sweep, comma separated.
        #[arg(long, value_delimiter = ',')]
        filter_grid: Option<Vec<usize>>,
    },
    /// Trace validation AUC against training set size.
    Curve {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Training subsample sizes, comma separated.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
}

impl Command {
    fn layer(&self) -> ConfigLayer {
        let mut layer = ConfigLayer::default();
        match self {
            Command::Ingest {
                min_first_tier,
                reply_scope,
            } => {
                layer.min_first_tier = *min_first_tier;
                layer.reply_scope = *reply_scope;
            }
            Command::Ngrams {
                data,
                min_count,
                filter_x,
            } => {
                data.fill(&mut layer);
                layer.min_count = *min_count;
                layer.filter_x = *filter_x;
            }
            Command::Train { data, model } => {
                data.fill(&mut layer);
                model.fill(&mut layer);
            }
            Command::Eval { data, model, split } => {
                data.fill(&mut layer);
                layer.model_file = model.clone();
                layer.eval_split = *split;
            }
            Command::Predict { data, model } | Command::Pairs { data, model } => {
                data.fill(&mut layer);
                layer.model_file = model.clone();
            }
            Command::Grid {
                data,
                model,
                windows,
                filter_grid,
            } => {
                data.fill(&mut layer);
                model.fill(&mut layer);
                layer.windows = windows.clone();
                layer.filter_grid = filter_grid.clone();
            }
            Command::Curve { data, model, sizes } => {
                data.fill(&mut layer);
                model.fill(&mut layer);
                layer.sizes = sizes.clone();
            }
        }
        layer
    }

    fn dispatch(&self, cfg: &RunConfig) -> anyhow::Result<()> {
        match self {
            Command::Ingest { .. } => commands::ingest::run(cfg),
            Command::Ngrams { .. } => commands::ngrams::run(cfg),
            Command::Train { .. } => commands::train::run(cfg),
            Command::Eval { .. } => commands::eval::run(cfg),
            Command::Predict { .. } => commands::predict::run(cfg),
            Command::Pairs { .. } => commands::pairs::run(cfg),
            Command::Grid { .. } => commands::grid::run(cfg),
            Command::Curve { .. } => commands::curve::run(cfg),
        }
    }
}

fn parse_activation(s: &str) -> Result<Activation, String> {
    match s {
        "relu" => Ok(Activation::Relu),
        "tanh" => Ok(Activation::Tanh),
        _ => Err(format!("unknown activation {s:?}, expected relu or tanh")),
    }
}

fn parse_granularity(s: &str) -> Result<Granularity, String> {
    match s {
        "month" => Ok(Granularity::Month),
        "year" => Ok(Granularity::Year),
        _ => Err(format!("unknown granularity {s:?}, expected month or year")),
    }
}

fn parse_reply_scope(s: &str) -> Result<ReplyScope, String> {
    match s {
        "direct_children" => Ok(ReplyScope::DirectChildren),
        "subtree" => Ok(ReplyScope::Subtree),
        _ => Err(format!(
            "unknown reply scope {s:?}, expected direct_children or subtree"
        )),
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = RunConfig::resolve(
        cli.common.config.as_deref(),
        &[cli.common.layer(), cli.command.layer()],
    )?;
    cli.command.dispatch(&cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
