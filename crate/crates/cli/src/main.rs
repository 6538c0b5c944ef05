//! `ee3p`: synthesize, inspect and estimate periodic motion in event streams.
//!
//! Failures print `error[<category>]: <message>` on stderr and exit with the
//! category's code (see [`exit_code`]).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ee3p::ErrorCategory;

#[derive(Parser)]
#[command(name = "ee3p", version, about = "Event-based frequency estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic recording from a scene spec.
    Synth(SynthArgs),
    /// Estimate the frequency of a recording.
    Estimate(RunArgs),
    /// Repeat the estimate over a list of durations or RoI sizes.
    Sweep(SweepArgs),
    /// Build frames and dump them as P5 graymaps.
    Frames(FramesArgs),
    /// Check that a recording parses and is well formed.
    Validate(ValidateArgs),
}

/// Pipeline flags. Every one of them may also come from `--config`, where
/// keys use the flag name without the leading dashes; flags win.
#[derive(Args, Debug, Default, Clone)]
pub struct RunArgs {
    /// key=value file with defaults for any flag below.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Event recording.
    #[arg(long, value_name = "PATH")]
    pub input: Option<String>,
    /// auto, text or binary.
    #[arg(long)]
    pub format: Option<String>,
    /// Square region, half-open: x0,y0,x1,y1.
    #[arg(long, value_name = "x0,y0,x1,y1")]
    pub roi: Option<String>,
    #[arg(long, value_name = "US")]
    pub duration_us: Option<String>,
    /// auto (most events) or a frame index.
    #[arg(long, value_name = "auto|N")]
    pub template: Option<String>,
    /// zero or shift.
    #[arg(long)]
    pub corr_mode: Option<String>,
    /// raw or norm.
    #[arg(long)]
    pub corr_norm: Option<String>,
    /// direct or transform.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub min_prominence: Option<String>,
    /// Defaults to the frame duration.
    #[arg(long, value_name = "US")]
    pub min_separation_us: Option<String>,
    #[arg(long, value_name = "N")]
    pub max_plateau_frames: Option<String>,
    /// overwrite or additive.
    #[arg(long)]
    pub cell_mode: Option<String>,
    /// Parabolic sub-frame peak times.
    #[arg(long, value_name = "BOOL", num_args = 0..=1, default_missing_value = "true")]
    pub refine_peaks: Option<String>,
    /// hz or rpm.
    #[arg(long)]
    pub unit: Option<String>,
    /// JSON report; printed to stdout when omitted.
    #[arg(long, value_name = "PATH")]
    pub report: Option<String>,
    /// Per-second CSV table.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<String>,
    /// Directory for P5 frame dumps.
    #[arg(long, value_name = "DIR")]
    pub dump_frames: Option<String>,
    /// Correlation score per frame, as CSV.
    #[arg(long, value_name = "PATH")]
    pub scores: Option<String>,
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated frame durations in µs.
    #[arg(long, value_name = "LIST")]
    pub durations: Option<String>,
    /// Comma-separated RoI sides in pixels, centred on the --roi centre.
    #[arg(long, value_name = "LIST")]
    pub roi_sizes: Option<String>,
}

#[derive(Args)]
pub struct FramesArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated frame indices; all frames when omitted.
    #[arg(long, value_name = "LIST")]
    pub index: Option<String>,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Scene spec as a key=value file.
    #[arg(long, value_name = "PATH")]
    pub spec: Option<PathBuf>,
    /// Extra spec line, applied after the file. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    /// auto (from the extension), text or binary.
    #[arg(long, default_value = "auto")]
    pub format: String,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct ValidateArgs {
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, default_value = "auto")]
    pub format: String,
}

pub fn exit_code(category: ErrorCategory) -> u8 {
    match category {
        ErrorCategory::Config => 2,
        ErrorCategory::Io => 3,
        ErrorCategory::Format => 4,
        ErrorCategory::InsufficientPeaks => 5,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let text = text.strip_prefix("error: ").unwrap_or(&text);
            eprintln!("error[config]: {}", text.trim_end());
            return ExitCode::from(exit_code(ErrorCategory::Config));
        }
    };
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Estimate(a) => commands::estimate(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Frames(a) => commands::frames(&a),
        Command::Validate(a) => commands::validate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = e.category();
            eprintln!("error[{category}]: {e}");
            ExitCode::from(exit_code(category))
        }
    }
}
