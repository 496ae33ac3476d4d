//! Command-line interface: run configuration, frame files, CSV products and the
//! `iccd` subcommands.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or statistics error.

pub mod commands;
pub mod config;
pub mod csv;
pub mod framefile;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::geometry::Region;

pub use config::{parse_threshold_range, parse_thresholds, RunConfig};
pub use csv::{fmt_g, Table};
pub use framefile::{write_frames, FrameHeader, FrameReader, FrameWriter};

#[derive(Debug, Clone, Parser)]
#[command(name = "iccd", version, about = "ICCD single-photon camera simulator and absolute QE calibration")]
pub struct Cli {
    /// Worker threads for frame generation and reductions (outputs do not depend on it).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Simulate a run and write it as an ICDF frame file.
    Simulate(SimulateArgs),
    /// Signal, noise, SNR and relative-QE rates versus threshold.
    Sweep(SweepArgs),
    /// Per-pixel g2 against a reference region, as a CSV grid.
    G2map(G2mapArgs),
    /// Absolute QE of a DUT region from a pump-on and a pump-off file.
    Calibrate(CalibrateArgs),
    /// Simulate and calibrate each entry of the configured wavelength plan.
    ScanWavelength(ScanArgs),
    /// Simulate and calibrate single-pixel DUTs for a uniformity table.
    ScanUniformity(ScanArgs),
    /// Assemble the threshold, wavelength and uniformity tables of a run directory.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pump {
    On,
    Off,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Number of frames; defaults to `analysis.frames`.
    #[arg(long)]
    pub frames: Option<u64>,
    /// Pump state; defaults to `source.pump_on`.
    #[arg(long, value_enum)]
    pub pump: Option<Pump>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Pump-on frame file.
    #[arg(long)]
    pub signal: PathBuf,
    /// Pump-off frame file.
    #[arg(long)]
    pub noise: PathBuf,
    /// Region "x0,y0,wxh".
    #[arg(long)]
    pub region: Region,
    /// "a:b:step", including a and excluding b.
    #[arg(long)]
    pub thresholds: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Dark frames for the baseline; defaults to the pump-off file.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct G2mapArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Reference region "x0,y0,wxh".
    #[arg(long = "ref")]
    pub reference: Region,
    #[arg(long, default_value_t = 80)]
    pub threshold: i32,
    #[arg(long)]
    pub out: PathBuf,
    /// Dark frames for the baseline; defaults to the input file itself.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub signal: PathBuf,
    #[arg(long)]
    pub noise: PathBuf,
    #[arg(long = "ref")]
    pub reference: Region,
    /// DUT region "x0,y0,wxh", or "auto" to locate it on a g2 map of the signal file.
    #[arg(long, default_value = "auto")]
    pub dut: String,
    /// One threshold or "a:b:step".
    #[arg(long, default_value = "80")]
    pub threshold: String,
    /// Total optical-channel transmission to correct for.
    #[arg(long, default_value_t = 1.0)]
    pub channel: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Pixels added around the automatically found DUT area.
    #[arg(long, default_value_t = 3)]
    pub margin: usize,
    #[arg(long, default_value_t = 2.0)]
    pub g2_min: f64,
    /// Pixels around the reference excluded from the DUT search.
    #[arg(long, default_value_t = 2)]
    pub halo: usize,
    /// Threshold at which the relative curve is matched to the absolute one;
    /// defaults to the highest threshold.
    #[arg(long)]
    pub anchor: Option<i32>,
    /// Bootstrap seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; defaults to `analysis.output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub dir: PathBuf,
}

/// Run one parsed invocation and return its standard output.
pub fn run(cli: &Cli) -> Result<String> {
    crate::with_workers(cli.workers, || commands::dispatch(&cli.command))?
}

/// Parse `args` (program name first) and run, returning the text that
/// `main_with_args` would print.
pub fn run_args<I, T>(args: I) -> Result<String>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Parse(e.to_string()))?;
    run(&cli)
}

/// Parse `args`, run, print, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
