//! Simulate a short pump-on run, write it as an ICDF frame file and read it back.

use std::error::Error;

use iccd_calib::cli::{write_frames, FrameReader};
use iccd_calib::sim::DepositKind;
use iccd_calib::{simulate_run, SimConfig, Simulator};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let config = SimConfig::desk_scale(7);
    let frames: Vec<_> = simulate_run(&config, 200)?.collect();

    let sim = Simulator::new(config.clone())?;
    let events = sim.sample_pair_events(0);
    let (_, trace) = sim.render_with_trace(&events, 0);
    println!(
        "frame 0: {} pairs emitted, {} photons detected, {} dark and {} stray events",
        events.len(),
        trace.count(DepositKind::Photon),
        trace.count(DepositKind::Dark),
        trace.count(DepositKind::Stray)
    );

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("signal.icdf");
    let header = write_frames(&path, &config.geometry, config.seed, frames.iter().cloned())?;
    println!(
        "{} frames of {}x{}: {} bytes on disk",
        header.frame_count,
        header.width,
        header.height,
        std::fs::metadata(&path)?.len()
    );

    let back: Vec<_> = FrameReader::open(&path)?.collect::<Result<_, _>>()?;
    assert!(back.iter().zip(&frames).all(|(a, b)| a.values == b.values));
    let mean = frames.iter().map(|f| f.total() as f64).sum::<f64>() / (200.0 * 4096.0);
    println!("round trip is bit-exact; mean pixel value {mean:.2} ADU");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
