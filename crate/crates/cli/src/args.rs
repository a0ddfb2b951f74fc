use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tagger_core::classifier::{LossMode, TrainConfig};
use tagger_core::confounds::TreatmentKind;
use tagger_core::rng::DEFAULT_SEED;

#[derive(Debug, Parser)]
#[command(
    name = "issue-tagger",
    version,
    about = "Classify issue reports as bug, enhancement or question",
    after_help = "Exit codes: 0 success, 1 invalid flags or data, 2 runtime or I/O failure.\n\
                  Secrets for `serve` are read from the environment only."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model from a labeled CSV and save it.
    Train(TrainCmd),
    /// Print the predicted label and per-class scores for texts.
    Predict(PredictCmd),
    /// Cross-validate or run a train/test holdout and report P/R/F.
    Evaluate(EvaluateCmd),
    /// Show per-class deltas between two saved evaluation reports.
    Compare(CompareCmd),
    /// Dataset construction and export.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Language and code-snippet detectors.
    #[command(subcommand)]
    Confounds(ConfoundsCmd),
    /// Run the webhook service (secrets come from TAGGER_* variables).
    Serve(ServeCmd),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Words only: no hashed subword rows, small model files.
    #[default]
    Compact,
    /// Character 3..6-grams over 2,000,000 hash buckets.
    Subword,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Softmax,
    Hs,
}

/// Training settings; each flag overrides the chosen preset.
#[derive(Clone, Debug, Args)]
pub struct TrainFlags {
    /// Base settings before individual overrides.
    #[arg(long, value_enum, default_value_t = Preset::Compact)]
    pub preset: Preset,
    /// Embedding width.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Initial learning rate (decays linearly to zero).
    #[arg(long)]
    pub lr: Option<f64>,
    /// Drop words seen fewer times than this.
    #[arg(long)]
    pub min_count: Option<u64>,
    /// Longest word n-gram (1 disables word n-grams).
    #[arg(long)]
    pub word_ngrams: Option<usize>,
    /// Shortest character n-gram (0 with --maxn 0 disables subwords).
    #[arg(long)]
    pub minn: Option<usize>,
    /// Longest character n-gram.
    #[arg(long)]
    pub maxn: Option<usize>,
    /// Hash buckets for character and word n-grams.
    #[arg(long)]
    pub bucket: Option<u64>,
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    /// Seed for initialization and example order.
    #[arg(long)]
    pub train_seed: Option<u64>,
}

impl TrainFlags {
    pub fn config(&self) -> TrainConfig {
        let mut c = match self.preset {
            Preset::Compact => TrainConfig::compact(),
            Preset::Subword => TrainConfig::default(),
        };
        if let Some(v) = self.dim {
            c.dim = v;
        }
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.lr {
            c.learning_rate = v;
        }
        if let Some(v) = self.min_count {
            c.min_count = v;
        }
        if let Some(v) = self.word_ngrams {
            c.word_ngrams = v;
        }
        if let Some(v) = self.minn {
            c.char_ngram_min = v;
        }
        if let Some(v) = self.maxn {
            c.char_ngram_max = v;
        }
        if let Some(v) = self.bucket {
            c.hashing_buckets = v;
        }
        if let Some(v) = self.loss {
            c.loss_mode = match v {
                LossArg::Softmax => LossMode::FlatSoftmax,
                LossArg::Hs => LossMode::HierarchicalSoftmax,
            };
        }
        if let Some(v) = self.train_seed {
            c.seed = v;
        }
        c
    }
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    /// Labeled CSV (id,label,title,body).
    #[arg(long, short)]
    pub input: PathBuf,
    /// Where to write the model.
    #[arg(long, short)]
    pub output: PathBuf,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["text", "file"])))]
pub struct PredictCmd {
    #[arg(long, short)]
    pub model: PathBuf,
    /// A single text to classify (may be empty).
    #[arg(long)]
    pub text: Option<String>,
    /// File with one text per line.
    #[arg(long)]
    pub file: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Cv,
    Holdout,
}

#[derive(Debug, Args)]
pub struct EvaluateCmd {
    /// Labeled CSV; the training set for holdout.
    #[arg(long, short)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = ProtocolArg::Cv)]
    pub protocol: ProtocolArg,
    /// Test CSV (holdout only).
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Number of folds (cv only, default 10).
    #[arg(long, short)]
    pub k: Option<usize>,
    /// Fold assignment seed.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Write the report as JSON here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Average precision and recall over folds instead of pooling (cv only).
    #[arg(long)]
    pub per_fold: bool,
    /// Folds trained in parallel (cv only).
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct CompareCmd {
    /// Report JSON of the random baseline.
    #[arg(long)]
    pub baseline: PathBuf,
    /// Report JSON of the treatment.
    #[arg(long)]
    pub treatment: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum DatasetCmd {
    /// Sample the same number of issues from every class.
    Balance {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long)]
        per_class: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Write a stratified id,fold assignment.
    Kfold {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long, short, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Write a tf-idf matrix (and a .vocab sidecar) for external learners.
    ExportTfidf {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Write __label__ lines for fastText-compatible tools.
    ExportFasttext {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Build a treatment arm and a random baseline arm of equal size.
    Treatment {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        kind: TreatmentKind,
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// CSV for the treatment arm.
        #[arg(long)]
        treatment_out: PathBuf,
        /// CSV for the baseline arm.
        #[arg(long)]
        baseline_out: PathBuf,
        /// Directory of .tri language profiles instead of the bundled set.
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> Result<TreatmentKind, String> {
    s.parse().map_err(|e: tagger_core::confounds::TreatmentError| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum ConfoundsCmd {
    /// Print the detected language tag and confidence.
    DetectLanguage {
        #[command(flatten)]
        source: TextSource,
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// Print whether the text holds a fenced code block.
    DetectSnippet {
        #[command(flatten)]
        source: TextSource,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct TextSource {
    #[arg(long)]
    pub text: Option<String>,
    /// Read the whole file as one text.
    #[arg(long)]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeCmd {
    /// Model file; defaults to TAGGER_MODEL_PATH.
    #[arg(long, short)]
    pub model: Option<PathBuf>,
    /// Listen port; defaults to TAGGER_PORT, then 3000.
    #[arg(long)]
    pub port: Option<u16>,
    /// Listen address.
    #[arg(long, default_value = "0.0.0.0")]
    pub host: String,
}
