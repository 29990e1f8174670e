mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use dfas_core::model::ModelKind;
use dfas_core::synthrig::{Mix, RigPreset, Split};

/// Face anti-spoofing from landmark disparity on two uncalibrated sensors.
#[derive(Debug, Parser)]
#[command(name = "dfas", version)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for synthesis and training.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default 1).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic two-sensor dataset.
    Synth(SynthArgs),
    /// Export dense disparity maps and per-landmark disparities.
    Maps(MapsArgs),
    /// Train one model kind on a dataset.
    Train(TrainArgs),
    /// Score a dataset split with trained models.
    Score(ScoreArgs),
    /// Error rates per attack kind, optionally with an ensemble threshold search.
    Eval(EvalArgs),
    /// Search ensemble thresholds for a target FPR.
    Thresholds(ThresholdArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: Option<usize>,
    /// Kind weights, e.g. `live=0.5,plane=0.25,cylinder=0.25`.
    #[arg(long)]
    pub mix: Option<Mix>,
    #[arg(long)]
    pub rig: Option<RigPreset>,
    /// Gaussian landmark noise, pixels.
    #[arg(long)]
    pub landmark_noise: Option<f64>,
    /// Landmark and crop augmentation on the training split.
    #[arg(long)]
    pub augment: bool,
}

#[derive(Debug, Args)]
pub struct MapsArgs {
    /// Dataset directory (reads its manifest and landmark files).
    #[arg(long, conflicts_with = "landmarks")]
    pub data: Option<PathBuf>,
    /// Landmark JSON files.
    #[arg(long, num_args = 1..)]
    pub landmarks: Vec<PathBuf>,
    /// Only the first N dataset samples.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long, default_value_t = 640)]
    pub width: usize,
    #[arg(long, default_value_t = 480)]
    pub height: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// disparity, sensors8, left, right or pairs.
    #[arg(long)]
    pub model: ModelKind,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Intensity and spatial augmentation of training inputs.
    #[arg(long)]
    pub augment: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// train, val, test or all.
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub left: Option<PathBuf>,
    #[arg(long)]
    pub right: Option<PathBuf>,
    /// Disparity model (any image model fits this column).
    #[arg(long)]
    pub disp: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Column {
    Left,
    Right,
    Disp,
}

impl Column {
    pub fn name(self) -> &'static str {
        match self {
            Column::Left => "left",
            Column::Right => "right",
            Column::Disp => "disp",
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub scores: PathBuf,
    /// FPR operating points; repeatable.
    #[arg(long = "fpr-target")]
    pub fpr_targets: Vec<f64>,
    /// Score column to evaluate (default disp, else the first present).
    #[arg(long, value_enum)]
    pub column: Option<Column>,
    /// Also search ensemble thresholds at the first FPR target.
    #[arg(long)]
    pub search: bool,
    /// Directory for report.csv and roc.csv (defaults to --out).
    #[arg(long)]
    pub report_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long = "fpr-target", default_value_t = 0.01)]
    pub fpr_target: f64,
}

pub fn parse_split(s: &str) -> anyhow::Result<Option<Split>> {
    if s == "all" {
        return Ok(None);
    }
    Ok(Some(s.parse()?))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("DFAS_LOG", "warn")).init();
    let cli = Cli::parse();
    let needs_out = matches!(
        cli.command,
        Command::Synth(_) | Command::Maps(_) | Command::Train(_) | Command::Score(_) | Command::Thresholds(_)
    );
    if needs_out && cli.out.is_none() {
        Cli::command()
            .error(clap::error::ErrorKind::MissingRequiredArgument, "--out <DIR> is required for this command")
            .exit();
    }
    let result = (|| {
        let mut cfg = config::RunConfig::load(cli.config.as_deref())?;
        if let Some(seed) = cli.seed {
            cfg.set_seed(seed);
        }
        if let Some(jobs) = cli.jobs {
            cfg.jobs = jobs.max(1);
        }
        let out = cli.out.as_deref();
        match cli.command {
            Command::Synth(a) => commands::synth(cfg, a, out.unwrap()),
            Command::Maps(a) => commands::maps(cfg, a, out.unwrap()),
            Command::Train(a) => commands::train(cfg, a, out.unwrap()),
            Command::Score(a) => commands::score(cfg, a, out.unwrap()),
            Command::Eval(a) => commands::eval(cfg, a, out),
            Command::Thresholds(a) => commands::thresholds(cfg, a, out.unwrap()),
        }
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
