mod backend;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use backend::BackendArgs;

#[derive(Debug, Parser)]
#[command(name = "ltcsum", version, about = "Personalized video summaries from thumbnail containers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Package a source into segments, thumbnail containers and a manifest.
    Pack(PackArgs),
    /// Write a synthetic source description (`*.synth.json`).
    Synth(SynthArgs),
    /// Build a centroid model from example images or flat colours.
    TrainCentroids(TrainArgs),
    /// Score every thumbnail of a packaged title and write a scorefile.
    Score(ScoreArgs),
    /// Serve packaged titles over HTTP.
    Serve(ServeArgs),
    /// Summarize one title against an origin and print the result as JSON.
    Summarize(SummarizeArgs),
    /// Run the job API used by the web front end.
    Jobs(JobsArgs),
    /// Time thumbnail mode against frame mode.
    Bench(BenchArgs),
}

#[derive(Debug, clap::Args)]
pub struct PackArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub id: String,
    #[arg(long, default_value = "other")]
    pub genre: String,
    /// Display title; defaults to the id.
    #[arg(long)]
    pub title: Option<String>,
    /// Event vocabulary; defaults to the genre's.
    #[arg(long, value_delimiter = ',')]
    pub vocabulary: Vec<String>,
    #[arg(long, default_value_t = 10.0)]
    pub segment_duration: f64,
    #[arg(long, default_value_t = 90)]
    pub jpeg_quality: u8,
}

#[derive(Debug, clap::Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Seconds.
    #[arg(long)]
    pub duration: f64,
    #[arg(long, default_value_t = 25.0)]
    pub fps: f64,
    /// `START:END:RRGGBB:LABEL`, covering seconds START..END.
    #[arg(long = "event", value_name = "SPEC")]
    pub events: Vec<String>,
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// `LABEL=IMAGE`; repeat a label to average several images.
    #[arg(long = "example", value_name = "LABEL=PATH")]
    pub examples: Vec<String>,
    /// `LABEL=RRGGBB`, a flat 160x90 swatch.
    #[arg(long = "swatch", value_name = "LABEL=RRGGBB")]
    pub swatches: Vec<String>,
}

#[derive(Debug, clap::Args)]
pub struct ScoreArgs {
    /// Packaged title directory (holding manifest.json).
    #[arg(long)]
    pub title: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, clap::Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub root: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
}

#[derive(Debug, clap::Args)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub origin: String,
    #[arg(long)]
    pub video: String,
    #[arg(long, value_delimiter = ',', required = true)]
    pub events: Vec<String>,
    /// Overrides the genre threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub pad: usize,
    /// Also join the selected segments into one transport stream.
    #[arg(long)]
    pub concat: bool,
    /// Also remux the selection through the transcoder.
    #[arg(long)]
    pub remux: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, clap::Args)]
pub struct JobsArgs {
    #[arg(long)]
    pub origin: String,
    #[arg(long, default_value = "127.0.0.1:8081")]
    pub addr: String,
    #[arg(long)]
    pub work_dir: PathBuf,
    /// Static front-end bundle served at `/`.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub workers: usize,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Thumbnail,
    Frame,
    Both,
}

#[derive(Debug, clap::Args)]
pub struct BenchArgs {
    /// Title id (resolved under `--root`) or a packaged title directory.
    #[arg(long)]
    pub title: String,
    #[arg(long, default_value = ".")]
    pub root: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub mode: ModeArg,
    #[arg(long, value_delimiter = ',', required = true)]
    pub events: Vec<String>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Use this origin for thumbnail mode instead of an in-process one.
    #[arg(long)]
    pub origin: Option<String>,
    #[arg(long, default_value = "bench-work")]
    pub work_dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("LTCSUM_LOG").unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = Cli::parse();
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return ExitCode::FAILURE;
        }
    };
    let result = rt.block_on(async {
        match cli.command {
            Command::Pack(a) => commands::pack(a),
            Command::Synth(a) => commands::synth(a),
            Command::TrainCentroids(a) => commands::train_centroids(a),
            Command::Score(a) => commands::score(a),
            Command::Serve(a) => commands::serve(a).await,
            Command::Summarize(a) => commands::summarize(a).await,
            Command::Jobs(a) => commands::jobs(a).await,
            Command::Bench(a) => commands::bench(a).await,
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e
                .chain()
                .any(|c| matches!(c.downcast_ref(), Some(ltcsum_core::Error::Usage(_))));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
