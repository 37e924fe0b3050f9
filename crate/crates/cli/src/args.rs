use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

/// Interpretable sentence features from a lexicon and an embedding source.
#[derive(Debug, Parser)]
#[command(name = "sentecon", version, args_override_self = true)]
pub struct Cli {
    /// TOML file with defaults for any flag. Top-level keys apply to every
    /// subcommand that accepts them; a `[subcommand]` table applies to one.
    /// Flags given on the command line win.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub workers: Option<u16>,

    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Embed lexicon items and write a category dictionary (SCDI).
    #[command(args_override_self = true)]
    BuildDict(BuildDictArgs),
    /// Encode sentences against a dictionary.
    #[command(args_override_self = true)]
    Encode(EncodeArgs),
    /// Encode sentences with a lexicon-only baseline.
    #[command(args_override_self = true)]
    Baseline(BaselineArgs),
    /// Fit a linear probe on a feature table or EMBS matrix.
    #[command(args_override_self = true)]
    ProbeTrain(ProbeTrainArgs),
    /// Score a trained probe on held-out data.
    #[command(args_override_self = true)]
    ProbeEval(ProbeEvalArgs),
    /// Correlate features with human category ratings.
    #[command(args_override_self = true)]
    AnalyzeAgreement(AgreementArgs),
    /// Matching- vs opposing-sense similarity for homonyms.
    #[command(args_override_self = true)]
    AnalyzeWordsense(WordSenseArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::BuildDict(_) => "build-dict",
            Command::Encode(_) => "encode",
            Command::Baseline(_) => "baseline",
            Command::ProbeTrain(_) => "probe-train",
            Command::ProbeEval(_) => "probe-eval",
            Command::AnalyzeAgreement(_) => "analyze-agreement",
            Command::AnalyzeWordsense(_) => "analyze-wordsense",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LexiconFormat {
    /// `.dic` files are LIWC-style, anything else category TSV.
    Auto,
    Dic,
    Tsv,
}

#[derive(Debug, Args)]
pub struct LexiconArgs {
    /// Lexicon file (LIWC `.dic` or `category<TAB>pattern...` TSV).
    #[arg(long, value_name = "PATH")]
    pub lexicon: PathBuf,

    #[arg(long, value_enum, default_value_t = LexiconFormat::Auto)]
    pub lexicon_format: LexiconFormat,

    /// Keep only the categories listed in this file (one per line).
    #[arg(long, value_name = "PATH", conflicts_with = "liwc_topical")]
    pub keep: Option<PathBuf>,

    /// Keep only the 52 topical LIWC 2015 categories.
    #[arg(long)]
    pub liwc_topical: bool,
}

#[derive(Debug, Args)]
pub struct ProviderArgs {
    /// Embedding source: an EMBS file, an http:// service URL, or
    /// `pseudo:SEED[:DIM]` for seeded non-semantic vectors.
    #[arg(long, value_name = "SPEC")]
    pub provider: String,

    /// Service retries after the first attempt.
    #[arg(long, default_value_t = 3)]
    pub retries: u32,

    /// Service request timeout in seconds.
    #[arg(long, default_value_t = 60)]
    pub timeout_secs: u64,

    /// Texts per service request.
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(1..))]
    pub batch_size: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Category items are the lexicon's words.
    Word,
    /// Category items are reference-corpus sentences containing its words.
    Reference,
}

#[derive(Debug, Args)]
pub struct BuildDictArgs {
    #[command(flatten)]
    pub lexicon: LexiconArgs,

    #[command(flatten)]
    pub provider: ProviderArgs,

    #[arg(long, value_enum, default_value_t = ModeArg::Word)]
    pub mode: ModeArg,

    /// Reference corpus, one sentence per line (reference mode).
    #[arg(long, value_name = "PATH", required_if_eq("mode", "reference"))]
    pub corpus: Option<PathBuf>,

    /// Centroids per category.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub centroids: u32,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, short, value_name = "PATH")]
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// Tab-separated with a header; other columns are passed through.
    Tsv,
    /// One sentence per non-blank line.
    Lines,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Sentences to encode.
    #[arg(long, short, value_name = "PATH")]
    pub input: PathBuf,

    #[arg(long, value_enum, default_value_t = InputFormat::Tsv)]
    pub input_format: InputFormat,

    #[arg(long, default_value = "text")]
    pub text_column: String,

    /// Copy the text column into the output too.
    #[arg(long)]
    pub keep_text: bool,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long, value_name = "PATH")]
    pub dictionary: PathBuf,

    #[command(flatten)]
    pub provider: ProviderArgs,

    #[command(flatten)]
    pub input: InputArgs,

    /// Feature table to write.
    #[arg(long, short, value_name = "PATH")]
    pub output: PathBuf,

    /// Also write the weights as an EMBS matrix keyed by row number.
    #[arg(long, value_name = "PATH")]
    pub matrix_out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BaselineMethod {
    /// Category counts.
    Bow,
    /// Counts plus word-vector soft matches.
    Softmatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum IncrementArg {
    Unit,
    Similarity,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long, value_enum)]
    pub method: BaselineMethod,

    #[command(flatten)]
    pub lexicon: LexiconArgs,

    #[command(flatten)]
    pub input: InputArgs,

    /// Divide counts by the sentence's token count (bow only).
    #[arg(long)]
    pub normalize: bool,

    /// Word vectors for soft matching (EMBS).
    #[arg(long, value_name = "PATH", required_if_eq("method", "softmatch"))]
    pub store: Option<PathBuf>,

    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,

    #[arg(long, value_enum, default_value_t = IncrementArg::Unit)]
    pub increment: IncrementArg,

    /// Recorded in the output metadata; baselines draw no random numbers.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, short, value_name = "PATH")]
    pub output: PathBuf,

    #[arg(long, value_name = "PATH")]
    pub matrix_out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Classification,
    Regression,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long, default_value = "label")]
    pub label_column: String,

    /// Non-feature columns besides the label. Columns a feature table marks
    /// as passthrough are skipped automatically.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, num_args = 1)]
    pub ignore_columns: Vec<String>,

    #[arg(long, value_enum, default_value_t = TaskArg::Classification)]
    pub task: TaskArg,
}

#[derive(Debug, Args)]
pub struct ProbeTrainArgs {
    /// Training feature table.
    #[arg(long, value_name = "PATH", required_unless_present = "train_embs")]
    pub train: Option<PathBuf>,

    /// Training features as an EMBS matrix (needs --train-labels).
    #[arg(long, value_name = "PATH", conflicts_with = "train", requires = "train_labels")]
    pub train_embs: Option<PathBuf>,

    /// One target per line, in matrix row order.
    #[arg(long, value_name = "PATH")]
    pub train_labels: Option<PathBuf>,

    #[command(flatten)]
    pub table: TableArgs,

    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,

    #[arg(long, default_value_t = 2000)]
    pub max_iterations: usize,

    #[arg(long, default_value_t = 1e-7)]
    pub tolerance: f64,

    #[arg(long, default_value_t = 20)]
    pub patience: usize,

    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,

    /// z-score features with training statistics.
    #[arg(long)]
    pub standardize: bool,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Model file to write.
    #[arg(long, short, value_name = "PATH")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProbeEvalArgs {
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,

    #[arg(long, value_name = "PATH", required_unless_present = "test_embs")]
    pub test: Option<PathBuf>,

    #[arg(long, value_name = "PATH", conflicts_with = "test", requires = "test_labels")]
    pub test_embs: Option<PathBuf>,

    #[arg(long, value_name = "PATH")]
    pub test_labels: Option<PathBuf>,

    /// Training split for the majority-class / mean baseline.
    #[arg(long, value_name = "PATH", conflicts_with = "train_embs")]
    pub train: Option<PathBuf>,

    #[arg(long, value_name = "PATH", requires = "train_labels")]
    pub train_embs: Option<PathBuf>,

    #[arg(long, value_name = "PATH")]
    pub train_labels: Option<PathBuf>,

    #[command(flatten)]
    pub table: TableArgs,

    /// Also write the metrics JSON here.
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    /// Feature table from `encode` or `baseline`.
    #[arg(long, value_name = "PATH")]
    pub features: PathBuf,

    /// Ratings table: id column, then one column per category.
    #[arg(long, value_name = "PATH")]
    pub annotations: PathBuf,

    /// Sentence id column of the feature table.
    #[arg(long, default_value = "id")]
    pub id_column: String,

    /// Per-sentence correlations table.
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RatioArg {
    /// mean matching / mean opposing
    MeanOfSimilarities,
    /// mean of per-sentence matching / opposing
    MeanOfRatios,
}

#[derive(Debug, Args)]
pub struct WordSenseArgs {
    #[arg(long, value_name = "PATH")]
    pub dictionary: PathBuf,

    #[command(flatten)]
    pub provider: ProviderArgs,

    /// Rows of `homonym<TAB>sense<TAB>sentence`.
    #[arg(long, value_name = "PATH")]
    pub sentences: PathBuf,

    /// Rows of `[homonym<TAB>]sense<TAB>kw1<TAB>kw2<TAB>kw3`.
    #[arg(long, value_name = "PATH")]
    pub keywords: PathBuf,

    #[arg(long, value_enum, default_value_t = RatioArg::MeanOfSimilarities)]
    pub ratio: RatioArg,

    /// Per-homonym summary table.
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
}
