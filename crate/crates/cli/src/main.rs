//! `gps`: synthesize data, fit generators and query their uncertainty.
//!
//! Every failure ends the process with a nonzero status and one stderr line
//! of the form `error: kind=<kind> message="<text>"`.

mod commands;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "gps", version, about = "Generative parameter sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the scenario named in the config and write it as CSV.
    Synth(RunArgs),
    /// Train a generator and write a checkpoint, training trace and resolved config.
    Fit(RunArgs),
    /// Write parameter draws from a checkpoint.
    Sample(QueryArgs),
    /// Write central marginal intervals from a checkpoint.
    Intervals(QueryArgs),
    /// Write per-input uncertainty reports for a classifier.
    Uqc(UqcArgs),
    /// Simulate point patterns from a fitted intensity.
    SimulatePp(SimulateArgs),
    /// Render a CSV as an SVG scatter plot, histogram or heatmap.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scenario seed for `synth`, training seed for `fit`.
    #[arg(long)]
    seed: Option<u64>,
    /// Keep only the first k records of a data file.
    #[arg(long)]
    limit: Option<usize>,
    /// Zero wall-clock fields so repeated runs write identical files.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args, Debug)]
struct QueryArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Config whose `uq` section supplies defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Draws per conditioning point.
    #[arg(long)]
    draws: Option<usize>,
    /// Interval coverage.
    #[arg(long)]
    level: Option<f64>,
    /// Conditioning inputs: `x_1..x_d` (optionally with a leading `label`)
    /// for classifiers, `x,y` for intensity fits.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Keep only the first k input rows.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args, Debug)]
struct UqcArgs {
    /// Classifier checkpoint; requires `--input`.
    #[arg(long, conflicts_with = "probs")]
    checkpoint: Option<PathBuf>,
    /// Precomputed probability draws with columns `[point_id,] p_1..p_H`.
    #[arg(long)]
    probs: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Config whose `point_process` section supplies defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of simulated patterns.
    #[arg(long)]
    paths: Option<usize>,
    /// Noise draws averaged into the mean intensity.
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    deterministic: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PlotKind {
    Scatter,
    Histogram,
    Heatmap,
}

#[derive(Args, Debug)]
struct PlotArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    kind: PlotKind,
    /// Output SVG file.
    #[arg(long)]
    out: PathBuf,
    /// Histogram column, or heatmap value column (default: last).
    #[arg(long)]
    column: Option<String>,
    /// Scatter columns (default: first two).
    #[arg(long)]
    x: Option<String>,
    #[arg(long)]
    y: Option<String>,
    #[arg(long, default_value_t = 40)]
    bins: usize,
    #[arg(long)]
    title: Option<String>,
}

/// A failure reported on one line.
#[derive(Debug)]
pub struct Failure {
    kind: &'static str,
    message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            kind: "usage",
            message: message.into(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self.kind {
            "usage" | "config" => 2,
            _ => 1,
        }
    }

    fn line(&self) -> String {
        let msg: String = self
            .message
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .replace('\\', "\\\\")
            .replace('"', "\\\"");
        format!("error: kind={} message=\"{msg}\"", self.kind)
    }
}

impl From<gps_core::Error> for Failure {
    fn from(e: gps_core::Error) -> Self {
        Self {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// Converts a library error raised while handling `path`, naming the file.
pub fn at(path: &std::path::Path) -> impl FnOnce(gps_core::Error) -> Failure + '_ {
    move |e| Failure {
        kind: e.kind(),
        message: format!("{}: {e}", path.display()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            let f = Failure::usage(first.trim_start_matches("error:").trim());
            eprintln!("{}", f.line());
            return ExitCode::from(f.exit_code());
        }
    };
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Sample(a) => commands::sample(&a),
        Command::Intervals(a) => commands::intervals(&a),
        Command::Uqc(a) => commands::uqc(&a),
        Command::SimulatePp(a) => commands::simulate_pp(&a),
        Command::Plot(a) => commands::plot(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.line());
            ExitCode::from(f.exit_code())
        }
    }
}
