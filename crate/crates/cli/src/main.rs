//! `windlayout`: evaluate and optimize offshore wind farm layouts.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use windlayout::Error;

#[derive(Debug, Parser)]
#[command(name = "windlayout", version, about = "Wind farm AEP evaluation and layout optimization")]
struct Cli {
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// AEP of a given layout, per sector.
    Evaluate(EvaluateArgs),
    /// Multistart layout optimization.
    Optimize(OptimizeArgs),
    /// SVG of the wakes for one sector and speed.
    Plot(PlotArgs),
    /// Optimize a range of turbine counts on the same area.
    Sweep(SweepArgs),
    /// Re-optimize under rotated wind roses and compare with a reference layout.
    Sensitivity(SensitivityArgs),
    /// Fit a wind rose from an hourly CSV and write it as JSON.
    FitWind(FitWindArgs),
    /// Replay a run from its manifest.
    Rerun(RerunArgs),
    /// Write the built-in synthetic test case as input files.
    Replica(ReplicaArgs),
}

/// Farm, turbine and wind inputs shared by most commands.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct Inputs {
    /// Farm configuration JSON.
    #[arg(long)]
    pub farm: PathBuf,
    /// Turbine JSON.
    #[arg(long)]
    pub turbine: PathBuf,
    /// Hourly wind CSV (`timestamp,v10_ms,direction_deg`).
    #[arg(long, conflicts_with = "rose", required_unless_present = "rose")]
    pub wind: Option<PathBuf>,
    /// Pre-fitted wind rose JSON.
    #[arg(long)]
    pub rose: Option<PathBuf>,
}

/// Overrides of the farm config's run defaults.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct RunFlags {
    /// Number of restarts.
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Speed step of the AEP quadrature, m/s.
    #[arg(long)]
    pub dv: Option<f64>,
    /// Stop after this many restarts without improvement (0 runs all).
    #[arg(long)]
    pub stall_limit: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    /// Layout CSV (`turbine_id,x_m,y_m`).
    #[arg(long)]
    pub layout: PathBuf,
    #[arg(long)]
    pub dv: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[arg(long)]
    pub n_turbines: usize,
    #[command(flatten)]
    pub run: RunFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PlotArgs {
    #[arg(long)]
    pub layout: PathBuf,
    #[arg(long)]
    pub farm: PathBuf,
    #[arg(long)]
    pub turbine: PathBuf,
    /// Sector number, starting at 1.
    #[arg(long)]
    pub sector: usize,
    /// Free-stream hub-height speed, m/s.
    #[arg(long)]
    pub speed: f64,
    /// Output SVG file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[arg(long)]
    pub n_min: usize,
    #[arg(long)]
    pub n_max: usize,
    /// Restarts per turbine count; quartiles are taken over these runs.
    #[arg(long)]
    pub runs_per_n: Option<usize>,
    #[command(flatten)]
    pub run: RunFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    /// Reference layout compared at every angle.
    #[arg(long)]
    pub layout: PathBuf,
    /// Rotation angles in degrees, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub angles: Vec<f64>,
    #[command(flatten)]
    pub run: RunFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitWindArgs {
    #[arg(long)]
    pub wind: PathBuf,
    #[arg(long)]
    pub farm: PathBuf,
    /// Turbine JSON; its hub height is the extrapolation target.
    #[arg(long)]
    pub turbine: PathBuf,
    /// Output rose JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RerunArgs {
    /// Manifest written by an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write to this directory instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplicaArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Hours of synthetic wind samples to write.
    #[arg(long, default_value_t = 8760)]
    pub hours: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum Failure {
    Invalid(Error),
    Infeasible(String),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible { .. } => Failure::Infeasible(e.to_string()),
            Error::Solver(_) => Failure::Solver(e.to_string()),
            other => Failure::Invalid(other),
        }
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Infeasible(_) => 3,
            Failure::Solver(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Invalid(e) => write!(f, "{e}"),
            Failure::Infeasible(m) => write!(f, "infeasible: {m}"),
            Failure::Solver(m) => write!(f, "{m}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
