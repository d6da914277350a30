//! `mtp`: validate, describe, detect and score turning points over
//! line-delimited conversation datasets.

mod config;
mod data;
mod error;
mod io;
mod pipeline;
mod scoring;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mtp_core::evaluator::Matching;
use mtp_core::preprocess::FrameMode;

pub use config::{
    Backends, ConsensusOptions, EvaluationOptions, GatewayFactory, Limits, PreprocessOptions,
    RunConfig,
};
pub use error::CliError;
pub use io::artifact_file_name;

#[derive(Debug, Parser)]
#[command(
    name = "mtp",
    version,
    about = "Turning-point detection in multi-modal conversations"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Reject unknown dataset fields and fail on any per-conversation error.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Omit wall-clock timestamps so outputs are byte-stable.
    #[arg(long, global = true)]
    pub reproducible: bool,
    /// Worker threads for per-conversation stages.
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a dataset against the schema rules.
    Validate(DatasetArg),
    /// Corpus statistics and feeling histograms.
    Stats(StatsArgs),
    /// Merge annotator turning points by majority vote.
    Consensus(ConsensusArgs),
    /// Build conversations from raw media and alignments.
    #[command(subcommand)]
    Preprocess(PreprocessCommand),
    /// Fill per-utterance visual descriptions from frames.
    Describe(DescribeArgs),
    /// Run the reasoning pipeline and write one artifact per conversation.
    Detect(DetectArgs),
    /// Score a run against the dataset's consensus labels.
    Evaluate(EvaluateArgs),
    /// Combine metrics files into one table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct DatasetArg {
    /// Line-delimited dataset; defaults to `dataset` from the config.
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub input: DatasetArg,
    /// Write the statistics document here as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of feeling labels listed per histogram.
    #[arg(long, default_value_t = 20)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct ConsensusArgs {
    #[command(flatten)]
    pub input: DatasetArg,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-conversation decision log (JSON lines).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub judge: Option<String>,
    #[arg(long)]
    pub delta_merge: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum PreprocessCommand {
    /// Turn an ASR alignment into a conversation, optionally attributing speakers.
    Asr(AsrArgs),
    /// Emit (and optionally run) scene clipping jobs.
    Clips(ClipsArgs),
    /// Sample one frame per utterance and record the frame paths.
    Frames(FramesArgs),
}

#[derive(Debug, Args)]
pub struct AsrArgs {
    pub alignment: PathBuf,
    #[arg(long)]
    pub id: String,
    #[arg(long)]
    pub scene: String,
    #[arg(long)]
    pub season: u32,
    #[arg(long)]
    pub episode: u32,
    /// JSON list of {speaker, line}; enables speaker attribution.
    #[arg(long)]
    pub script: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClipsArgs {
    /// JSON list of {season, episode, scene_tag, start_s, end_s}.
    pub boundaries: PathBuf,
    #[arg(long)]
    pub media: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Execute the jobs with the media tool.
    #[arg(long)]
    pub run: bool,
    #[arg(long, default_value = "ffmpeg")]
    pub ffmpeg: String,
}

#[derive(Debug, Args)]
pub struct FramesArgs {
    #[command(flatten)]
    pub input: DatasetArg,
    /// Directory holding the `sXXeYY_<scene>.mp4` clips.
    #[arg(long)]
    pub clips_dir: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Dataset with frame paths filled in.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<FrameModeArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub run: bool,
    #[arg(long, default_value = "ffmpeg")]
    pub ffmpeg: String,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum FrameModeArg {
    Random,
    Midpoint,
}

impl From<FrameModeArg> for FrameMode {
    fn from(m: FrameModeArg) -> Self {
        match m {
            FrameModeArg::Random => FrameMode::RandomInUtterance,
            FrameModeArg::Midpoint => FrameMode::Midpoint,
        }
    }
}

#[derive(Debug, Args)]
pub struct DescribeArgs {
    #[command(flatten)]
    pub input: DatasetArg,
    #[arg(long)]
    pub out: PathBuf,
    /// Raw and summarised descriptions per utterance (JSON lines).
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub word_limit: Option<usize>,
    #[arg(long)]
    pub failure_ceiling: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub input: DatasetArg,
    /// Defaults to `output_dir` from the config.
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    #[arg(long)]
    pub no_tracking: bool,
    #[arg(long)]
    pub few_shot: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: DatasetArg,
    /// Directory written by `detect`.
    #[arg(long, conflicts_with = "submission")]
    pub run_dir: Option<PathBuf>,
    /// External predictions as JSON lines of {conversation_id, has_tp, timestamps, score?}.
    #[arg(long)]
    pub submission: Option<PathBuf>,
    #[arg(long)]
    pub delta_t: Option<f64>,
    #[arg(long, value_enum)]
    pub matching: Option<MatchingArg>,
    /// Where metrics.json and the report go; defaults to the run directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Row label in the report.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum MatchingArg {
    Exists,
    Greedy,
}

impl From<MatchingArg> for Matching {
    fn from(m: MatchingArg) -> Self {
        match m {
            MatchingArg::Exists => Matching::Exists,
            MatchingArg::Greedy => Matching::Greedy,
        }
    }
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `NAME=metrics.json` pairs, one table row each.
    #[arg(required = true)]
    pub runs: Vec<String>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Config file merged with the global flags.
pub(crate) struct Context {
    pub config: RunConfig,
    pub strict: bool,
    pub reproducible: bool,
    pub parallelism: Option<usize>,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self, CliError> {
        let mut config = match &cli.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if cli.strict {
            config.strict = true;
        }
        if cli.reproducible {
            config.reproducible = true;
        }
        if cli.parallelism.is_some() {
            config.parallelism = cli.parallelism;
        }
        config.reasoner.reproducible = config.reproducible;
        config.validate()?;
        Ok(Self {
            strict: config.strict,
            reproducible: config.reproducible,
            parallelism: config.parallelism,
            config,
        })
    }

    pub fn dataset_path(&self, arg: &DatasetArg) -> Result<PathBuf, CliError> {
        arg.dataset
            .clone()
            .or_else(|| self.config.dataset.clone())
            .ok_or_else(|| CliError::Config("no dataset given and none in the config".into()))
    }

    pub fn output_dir(&self, flag: Option<&PathBuf>, what: &str) -> Result<PathBuf, CliError> {
        flag.cloned()
            .or_else(|| self.config.output_dir.clone())
            .ok_or_else(|| {
                CliError::Config(format!("no {what} given and no output_dir in the config"))
            })
    }

    pub fn pool(&self) -> Result<rayon::ThreadPool, CliError> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.parallelism {
            builder = builder.num_threads(n);
        }
        builder
            .build()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))
    }
}

pub fn run<W: Write>(cli: &Cli, out: &mut W) -> Result<(), CliError> {
    let ctx = Context::new(cli)?;
    match &cli.command {
        Command::Validate(a) => data::validate(&ctx, a, out),
        Command::Stats(a) => data::stats(&ctx, a, out),
        Command::Consensus(a) => data::consensus(&ctx, a, out),
        Command::Preprocess(PreprocessCommand::Asr(a)) => pipeline::asr(&ctx, a, out),
        Command::Preprocess(PreprocessCommand::Clips(a)) => pipeline::clips(&ctx, a, out),
        Command::Preprocess(PreprocessCommand::Frames(a)) => pipeline::frames(&ctx, a, out),
        Command::Describe(a) => pipeline::describe(&ctx, a, out),
        Command::Detect(a) => pipeline::detect(&ctx, a, out),
        Command::Evaluate(a) => scoring::evaluate(&ctx, a, out),
        Command::Report(a) => scoring::report(&ctx, a, out),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors go to stderr.
pub fn execute<I, T, W>(args: I, out: &mut W) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    W: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
