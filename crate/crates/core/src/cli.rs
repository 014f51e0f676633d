//! `posbias` command line: analyze, generate, synth, rouge and stats.
//!
//! Exit statuses: 0 success, 1 data error, 2 configuration error, 3 I/O
//! error, 4 remote endpoint error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::biasmetrics::RougeMetric;
use crate::corpus::{corpus_stats, load_corpus, save_corpus, CorpusError, CorpusFormat, SummarySource};
use crate::llmclient::{
    builtin_template, builtin_template_names, generate_summaries, ChatClient, GenerationConfig, ListStyle, LlmError,
    PromptTemplate, RetryPolicy, UreqTransport,
};
use crate::pipeline::{analyze, AnalyzeError, AnalyzeOptions};
use crate::posmap::{Aggregation, BinPositions, Phi};
use crate::report::{emit_all, ReportError, ShortArticlePolicy};
use crate::simmetrics::{corpus_rouge, SimError};
use crate::synth::{generate_synthetic, SynthError, SynthSpec, SynthTruth};
use crate::textproc::{SentenceSplitter, TextError};

pub const API_KEY_ENV: &str = "POSBIAS_API_KEY";

#[derive(Debug)]
pub enum CliError {
    Data(String),
    Config(String),
    Io(String),
    Remote(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Remote(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Remote(m) => write!(f, "remote error: {m}"),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io { .. } => CliError::Io(e.to_string()),
            CorpusError::UnknownFormat(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<AnalyzeError> for CliError {
    fn from(e: AnalyzeError) -> Self {
        match e {
            AnalyzeError::Config(_) | AnalyzeError::UnknownModel(_) | AnalyzeError::Pool(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Config(format!("synth spec: {e}"))
    }
}

impl From<LlmError> for CliError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::Template { .. } => CliError::Config(e.to_string()),
            _ => CliError::Remote(e.to_string()),
        }
    }
}

impl From<TextError> for CliError {
    fn from(e: TextError) -> Self {
        match e {
            TextError::AbbrevFile { .. } => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "posbias", version, about = "Measure position bias of summaries against their source articles")]
pub struct Cli {
    /// Worker threads for per-article work.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: u64,
    /// Seed for every random choice (overrides the seed in a synth spec).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for analysis outputs.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Map summaries to article segments and report distributions, distances and ROUGE.
    Analyze(AnalyzeArgs),
    /// Fill in model summaries from a chat-completion endpoint.
    Generate(GenerateArgs),
    /// Write a synthetic corpus with known positional targets.
    Synth(SynthArgs),
    /// Corpus-level ROUGE-1/2/L between two line-aligned files.
    Rouge(RougeArgs),
    /// Sentence counts of a corpus.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PhiArg {
    Tfidf,
    Rouge1,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    Skip,
    Error,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BinsArg {
    Normalized,
    Index,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AggregationArg {
    Pooled,
    PerArticle,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    R1,
    R2,
    Rl,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Jsonl,
    Csv,
}

impl From<FormatArg> for CorpusFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Jsonl => CorpusFormat::Jsonl,
            FormatArg::Csv => CorpusFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ListStyleArg {
    Dash,
    Numbered,
    Plain,
}

impl From<ListStyleArg> for ListStyle {
    fn from(s: ListStyleArg) -> Self {
        match s {
            ListStyleArg::Dash => ListStyle::DashBulleted,
            ListStyleArg::Numbered => ListStyle::Numbered,
            ListStyleArg::Plain => ListStyle::Plain,
        }
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Corpus file (jsonl or csv).
    pub input: PathBuf,
    /// Corpus format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Name echoed into the outputs; defaults to the input file stem.
    #[arg(long)]
    pub name: Option<String>,
    /// Number of article segments.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    /// Sentence similarity used for mapping.
    #[arg(long, value_enum, default_value_t = PhiArg::Tfidf)]
    pub phi: PhiArg,
    /// Article sentences credited per summary sentence.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=3))]
    pub top_n: u64,
    /// Lead cutoff for the lead-bias fraction.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub k_prime: u64,
    #[arg(long, value_enum, default_value_t = PolicyArg::Skip)]
    pub short_article_policy: PolicyArg,
    #[arg(long, value_enum, default_value_t = BinsArg::Normalized)]
    pub bin_positions: BinsArg,
    #[arg(long, value_enum, default_value_t = AggregationArg::Pooled)]
    pub aggregation: AggregationArg,
    /// Models to analyze (comma separated); all models when omitted.
    #[arg(long, value_delimiter = ',', conflicts_with = "gold_only")]
    pub models: Option<Vec<String>>,
    /// Only compute the gold distribution.
    #[arg(long)]
    pub gold_only: bool,
    /// ROUGE metric(s) correlated with the distance across models.
    #[arg(long, value_enum, default_value_t = MetricArg::All)]
    pub correlation_metric: MetricArg,
    /// Extra abbreviations for the sentence splitter, one per line.
    #[arg(long)]
    pub abbrev_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Corpus to complete.
    pub input: PathBuf,
    /// Where to write the updated corpus.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Chat-completion URL.
    #[arg(long)]
    pub endpoint: String,
    /// Model name sent to the endpoint and used as the summary key.
    #[arg(long)]
    pub model_name: String,
    /// Built-in template (e.g. xsum, cnndm, llama2/reddit).
    #[arg(long, default_value = "xsum", conflicts_with = "template_file")]
    pub template: String,
    /// Custom template containing one {Article} placeholder.
    #[arg(long)]
    pub template_file: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub required_sentences: Option<u64>,
    /// List style of a custom template.
    #[arg(long, value_enum, default_value_t = ListStyleArg::Dash)]
    pub list_style: ListStyleArg,
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_in_flight: u64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    pub max_attempts: u32,
    /// Initial retry backoff in milliseconds.
    #[arg(long, default_value_t = 500)]
    pub backoff_ms: u64,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 120)]
    pub timeout_secs: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// key = value spec file.
    #[arg(long)]
    pub spec: PathBuf,
    /// Corpus path; the ground truth goes to `<out>.truth.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Args)]
pub struct RougeArgs {
    /// One candidate summary per line.
    pub candidates: PathBuf,
    /// One reference summary per line.
    pub references: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// `gold` or `model:<name>`.
    #[arg(long, default_value = "gold")]
    pub summary_source: String,
    #[arg(long)]
    pub abbrev_file: Option<PathBuf>,
}

fn format_of(explicit: Option<FormatArg>, path: &Path) -> CorpusFormat {
    explicit.map_or_else(|| CorpusFormat::from_path(path), Into::into)
}

fn splitter(abbrev_file: Option<&Path>) -> Result<SentenceSplitter, CliError> {
    let base = SentenceSplitter::default();
    Ok(match abbrev_file {
        Some(p) => base.with_abbrev_file(p)?,
        None => base,
    })
}

pub fn truth_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".truth.json");
    PathBuf::from(name)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let workers = cli.workers as usize;
    match cli.command {
        Command::Analyze(args) => cmd_analyze(args, workers, cli.seed.unwrap_or(0), &cli.out_dir),
        Command::Generate(args) => cmd_generate(args, cli.seed.unwrap_or(0)),
        Command::Synth(args) => cmd_synth(args, cli.seed),
        Command::Rouge(args) => cmd_rouge(args),
        Command::Stats(args) => cmd_stats(args),
    }
}

fn cmd_analyze(args: AnalyzeArgs, workers: usize, seed: u64, out_dir: &Path) -> Result<(), CliError> {
    let records = load_corpus(&args.input, format_of(args.format, &args.input))?;
    let name = args.name.clone().unwrap_or_else(|| {
        args.input
            .file_stem()
            .map_or_else(|| "corpus".to_string(), |s| s.to_string_lossy().into_owned())
    });
    let opts = AnalyzeOptions {
        k: args.k as usize,
        phi: match args.phi {
            PhiArg::Tfidf => Phi::TfidfCosine,
            PhiArg::Rouge1 => Phi::Rouge1,
        },
        top_n: args.top_n as usize,
        k_prime: args.k_prime as usize,
        short_article_policy: match args.short_article_policy {
            PolicyArg::Skip => ShortArticlePolicy::Skip,
            PolicyArg::Error => ShortArticlePolicy::Error,
        },
        bin_positions: match args.bin_positions {
            BinsArg::Normalized => BinPositions::Normalized,
            BinsArg::Index => BinPositions::Index,
        },
        aggregation: match args.aggregation {
            AggregationArg::Pooled => Aggregation::Pooled,
            AggregationArg::PerArticle => Aggregation::PerArticle,
        },
        models: if args.gold_only { Some(Vec::new()) } else { args.models.clone() },
        correlation_metrics: match args.correlation_metric {
            MetricArg::R1 => vec![RougeMetric::R1],
            MetricArg::R2 => vec![RougeMetric::R2],
            MetricArg::Rl => vec![RougeMetric::Rl],
            MetricArg::All => RougeMetric::ALL.to_vec(),
        },
        workers,
        seed,
        splitter: splitter(args.abbrev_file.as_deref())?,
    };
    let bundle = analyze(&records, &name, &opts)?;
    if bundle.skipped_short_articles > 0 {
        eprintln!(
            "skipped {} of {} articles with fewer than {} sentences",
            bundle.skipped_short_articles,
            records.len(),
            bundle.k
        );
    }
    if bundle.reports.len() < 3 && !bundle.reports.is_empty() {
        eprintln!("fewer than 3 models: correlations omitted");
    }
    for w in &bundle.warnings {
        eprintln!("warning: {w}");
    }
    for path in emit_all(&bundle, out_dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn load_template(args: &GenerateArgs) -> Result<PromptTemplate, CliError> {
    let template = match &args.template_file {
        Some(path) => PromptTemplate::from_file(path, args.required_sentences.unwrap_or(1) as usize, args.list_style.into())?,
        None => builtin_template(&args.template).ok_or_else(|| {
            CliError::Config(format!(
                "unknown template {:?}; built-ins: {}",
                args.template,
                builtin_template_names().join(", ")
            ))
        })?,
    };
    match (args.template_file.is_none(), args.required_sentences) {
        (true, Some(n)) => Ok(template.with_required_sentences(n as usize)?),
        _ => Ok(template),
    }
}

fn cmd_generate(args: GenerateArgs, seed: u64) -> Result<(), CliError> {
    let token = std::env::var(API_KEY_ENV).map_err(|_| CliError::Config(format!("{API_KEY_ENV} is not set")))?;
    let template = load_template(&args)?;
    let format = format_of(args.format, &args.input);
    let mut records = load_corpus(&args.input, format)?;
    let retry = RetryPolicy {
        max_attempts: args.max_attempts,
        initial_backoff: Duration::from_millis(args.backoff_ms),
        ..RetryPolicy::default()
    };
    let transport = UreqTransport::new(&args.endpoint, token, Duration::from_secs(args.timeout_secs));
    let client = ChatClient::new(transport, &args.model_name, args.temperature, retry);
    let config = GenerationConfig {
        model_name: args.model_name.clone(),
        template,
        seed,
        max_in_flight: args.max_in_flight as usize,
    };
    let outcome = generate_summaries(&mut records, &client, &config);
    let out_format = args.format.map_or_else(|| CorpusFormat::from_path(&args.output), Into::into);
    save_corpus(&records, &args.output, out_format)?;
    match outcome {
        Ok(stats) => {
            println!("{}", stats.summary_line());
            Ok(())
        }
        Err(failure) => {
            println!("{}", failure.stats.summary_line());
            Err(failure.error.into())
        }
    }
}

fn cmd_synth(args: SynthArgs, seed: Option<u64>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.spec)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.spec.display())))?;
    let mut spec = SynthSpec::parse(&text)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let records = generate_synthetic(&spec)?;
    save_corpus(&records, &args.out, format_of(args.format, &args.out))?;
    let truth = truth_path(&args.out);
    let mut json = serde_json::to_string_pretty(&SynthTruth::of(&spec)).expect("truth serializes");
    json.push('\n');
    std::fs::write(&truth, json).map_err(|e| CliError::Io(format!("{}: {e}", truth.display())))?;
    println!("{}", args.out.display());
    println!("{}", truth.display());
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn cmd_rouge(args: RougeArgs) -> Result<(), CliError> {
    let candidates = read_lines(&args.candidates)?;
    let references = read_lines(&args.references)?;
    let scores = corpus_rouge(&candidates, &references).map_err(|e| match e {
        SimError::LengthMismatch { .. } | SimError::NoPairs => CliError::Data(e.to_string()),
        other => CliError::Data(other.to_string()),
    })?;
    println!("{:.4}\t{:.4}\t{:.4}", scores.r1, scores.r2, scores.rl);
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<(), CliError> {
    let source: SummarySource = args.summary_source.parse().map_err(CliError::Config)?;
    let records = load_corpus(&args.input, format_of(args.format, &args.input))?;
    let stats = corpus_stats(&records, &splitter(args.abbrev_file.as_deref())?, &source)?;
    println!("num_articles: {}", stats.num_articles);
    println!("avg_sentences_per_article: {:.4}", stats.avg_sentences_per_article);
    println!("total_summary_sentences: {}", stats.total_summary_sentences);
    println!("avg_sentences_per_summary: {:.4}", stats.avg_sentences_per_summary);
    Ok(())
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("posbias: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn defaults() {
        let cli = Cli::try_parse_from(["posbias", "analyze", "c.jsonl"]).unwrap();
        let Command::Analyze(a) = cli.command else { panic!() };
        assert_eq!((a.k, a.top_n, a.k_prime), (10, 1, 3));
        assert!(matches!(a.phi, PhiArg::Tfidf));
        assert_eq!(cli.workers, 1);
    }

    #[test]
    fn rejects_out_of_range_flags() {
        for bad in [
            vec!["posbias", "analyze", "c", "--top-n", "4"],
            vec!["posbias", "analyze", "c", "--k", "0"],
            vec!["posbias", "--workers", "0", "analyze", "c"],
            vec!["posbias", "analyze", "c", "--gold-only", "--models", "a"],
        ] {
            assert!(Cli::try_parse_from(bad).is_err());
        }
    }

    #[test]
    fn truth_sidecar_name() {
        assert_eq!(truth_path(Path::new("out/c.jsonl")), PathBuf::from("out/c.jsonl.truth.json"));
    }
}
