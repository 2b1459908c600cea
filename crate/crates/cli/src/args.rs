use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const DELIMITER_HELP: &str = "Delimiter pair by short name: \
curly {…}, square […], angle <…>, paren (…), quote \"…\", dash --…--, \
triple-angle <<<…>>>, blockquote > \"…\", bullet * \"…\", liquid {{…}}. \
Custom pairs can be added with --prompt-config.";

pub const TEMPLATE_HELP: &str = "Prompt template: vanilla, contrastive, negation-v1, negation-v2, \
or a custom name from --prompt-config.";

#[derive(Debug, Parser)]
#[command(name = "prompt-rerank", version, about = "Arbitrary text style transfer by prompting and reranking")]
pub struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rewrite one text, or every record of a dataset, into a target style.
    Transfer(TransferArgs),
    /// Run every template x delimiter x direction x shots cell and write a CSV table.
    Sweep(SweepArgs),
    /// Generate the symbolic-comparison dataset.
    Symb(SymbArgs),
    /// Undo tokenizer spacing line by line.
    Clean(CleanArgs),
    /// Score outputs from a manifest or from plain text files.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    /// Use in-process mocks for every service not given explicitly.
    #[arg(long)]
    pub mock: bool,
    /// Server exposing /complete, /score, /fill_mask and /embed.
    #[arg(long, env = "PNR_BASE_URL")]
    pub base_url: Option<String>,
    /// Completion endpoint (URL or mock:NAME).
    #[arg(long, env = "PNR_COMPLETE_URL")]
    pub complete_url: Option<String>,
    /// Token scoring endpoint.
    #[arg(long, env = "PNR_SCORE_URL")]
    pub score_url: Option<String>,
    /// Masked-LM endpoint.
    #[arg(long, env = "PNR_FILL_MASK_URL")]
    pub fill_mask_url: Option<String>,
    /// Token embedding endpoint.
    #[arg(long, env = "PNR_EMBED_URL")]
    pub embed_url: Option<String>,
    /// Style classifier endpoint, same shape as /fill_mask.
    #[arg(long, env = "PNR_CLASSIFIER_URL")]
    pub classifier_url: Option<String>,
    /// Mask token of the masked LM.
    #[arg(long, env = "PNR_MASK_TOKEN")]
    pub mask_token: Option<String>,
    /// Per-request timeout in seconds.
    #[arg(long, env = "PNR_TIMEOUT_SECS")]
    pub timeout_secs: Option<f64>,
    /// Attempts per request before a transport failure is reported.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub max_attempts: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrengthArg {
    MlmCloze,
    ExternalClassifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecodeArg {
    Beam,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Jsonl,
    Tsv,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Candidates generated per example.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub k: u32,
    /// Drop the fluency factor from the reranking score.
    #[arg(long)]
    pub no_fluency: bool,
    /// Where the style-strength factor comes from.
    #[arg(long, value_enum, default_value_t = StrengthArg::MlmCloze)]
    pub strength_source: StrengthArg,
    #[arg(long, value_enum, default_value_t = DecodeArg::Beam)]
    pub decode: DecodeArg,
    /// Sampling temperature (with --decode sample).
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(1..))]
    pub max_new_tokens: u32,
    /// Base seed; example i uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Examples processed concurrently.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: u64,
    /// Few-shot exemplars (JSONL with input, output, source_style, target_style).
    #[arg(long)]
    pub exemplars: Option<PathBuf>,
    /// TOML file adding or overriding templates and delimiters.
    #[arg(long)]
    pub prompt_config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DatasetArgs {
    /// Dataset file (JSONL or TSV).
    #[arg(long = "input", short = 'i')]
    pub input: Option<PathBuf>,
    /// Dataset format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Fail on the first malformed row instead of skipping it.
    #[arg(long)]
    pub strict: bool,
    /// Clean tokenizer spacing in sources and references on load.
    #[arg(long)]
    pub clean: bool,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    /// Text to rewrite (instead of --input).
    #[arg(long, conflicts_with = "input", requires_all = ["from", "to"])]
    pub text: Option<String>,
    /// Source style of --text.
    #[arg(long = "from", requires = "text")]
    pub from: Option<String>,
    /// Target style of --text.
    #[arg(long = "to", requires = "text")]
    pub to: Option<String>,
    #[arg(long, default_value = "contrastive", help = TEMPLATE_HELP)]
    pub template: String,
    #[arg(long, default_value = "curly", help = DELIMITER_HELP)]
    pub delimiter: String,
    /// Exemplars per prompt, taken from --exemplars.
    #[arg(long, default_value_t = 0)]
    pub shots: usize,
    /// Write the run manifest (JSONL) here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Templates to include, comma separated (default: all four).
    #[arg(long, value_delimiter = ',', help = TEMPLATE_HELP)]
    pub templates: Vec<String>,
    /// Delimiters to include, comma separated (default: all ten).
    #[arg(long, value_delimiter = ',', help = DELIMITER_HELP)]
    pub delimiters: Vec<String>,
    /// Shot counts, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub shots: Vec<usize>,
    /// Write the CSV table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write one manifest per successful cell into this directory.
    #[arg(long)]
    pub manifest_dir: Option<PathBuf>,
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct SymbArgs {
    /// Number of records.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Jsonl)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct CleanArgs {
    /// Input text file, one text per line.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Run manifest to re-score.
    #[arg(long, conflicts_with_all = ["hyp", "copy_baseline"])]
    pub manifest: Option<PathBuf>,
    /// System outputs, one per line.
    #[arg(long)]
    pub hyp: Option<PathBuf>,
    /// Sources, one per line, parallel to --hyp.
    #[arg(long)]
    pub src: Option<PathBuf>,
    /// References, one per line, parallel to --hyp.
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    /// Target style of every line of --hyp (enables classifier accuracy).
    #[arg(long, requires_all = ["hyp", "source_style"])]
    pub target_style: Option<String>,
    /// Source style of every line of --hyp.
    #[arg(long, requires = "target_style")]
    pub source_style: Option<String>,
    /// Score the copy-the-input baseline on --input.
    #[arg(long, conflicts_with = "hyp")]
    pub copy_baseline: bool,
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
}
