//! Drive the `iccd` command line end to end in a scratch directory.

use std::error::Error;

use iccd_calib::cli::{main_with_args, RunConfig};
use iccd_calib::SimConfig;

fn iccd(args: &[&str]) -> Result<(), Box<dyn Error>> {
    let code = main_with_args(std::iter::once("iccd").chain(args.iter().copied()));
    if code == 0 {
        Ok(())
    } else {
        Err(format!("iccd {} exited with {code}", args.join(" ")).into())
    }
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let dir = tempfile::tempdir()?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();

    let mut config = RunConfig::from_sim(&SimConfig::closed_loop(7));
    config.analysis.frames = 30_000;
    config.analysis.baseline_frames = 300;
    config.echo(dir.path().join("run.toml").as_path())?;

    iccd(&["simulate", "--config", &p("run.toml"), "--pump", "on", "--out", &p("signal.icdf")])?;
    iccd(&["simulate", "--config", &p("run.toml"), "--pump", "off", "--out", &p("noise.icdf")])?;
    std::fs::create_dir_all(p("run"))?;
    iccd(&[
        "sweep", "--signal", &p("signal.icdf"), "--noise", &p("noise.icdf"),
        "--region", "46,27,10x10", "--thresholds", "5:65:20", "--out", &p("run/sweep.csv"),
    ])?;
    iccd(&["g2map", "--input", &p("signal.icdf"), "--ref", "10,29,6x6", "--threshold", "5", "--out", &p("g2.csv")])?;
    iccd(&[
        "calibrate", "--signal", &p("signal.icdf"), "--noise", &p("noise.icdf"), "--ref", "10,29,6x6",
        "--dut", "auto", "--threshold", "5:65:20", "--anchor", "5", "--margin", "2", "--channel", "0.88", "--out", &p("run"),
    ])?;
    iccd(&["report", "--dir", &p("run")])?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
