//! Every runnable example completes without error.

#[allow(dead_code)]
#[path = "../examples/absolute_calibration.rs"]
mod absolute_calibration;

#[test]
fn absolute_calibration_runs() {
    absolute_calibration::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/cli_pipeline.rs"]
mod cli_pipeline;

#[test]
fn cli_pipeline_runs() {
    cli_pipeline::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/g2_map.rs"]
mod g2_map;

#[test]
fn g2_map_runs() {
    g2_map::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/qe_vs_threshold.rs"]
mod qe_vs_threshold;

#[test]
fn qe_vs_threshold_runs() {
    qe_vs_threshold::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/simulate_frames.rs"]
mod simulate_frames;

#[test]
fn simulate_frames_runs() {
    simulate_frames::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/threshold_sweep.rs"]
mod threshold_sweep;

#[test]
fn threshold_sweep_runs() {
    threshold_sweep::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/uniformity_scan.rs"]
mod uniformity_scan;

#[test]
fn uniformity_scan_runs() {
    uniformity_scan::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/wavelength_scan.rs"]
mod wavelength_scan;

#[test]
fn wavelength_scan_runs() {
    wavelength_scan::run_example().unwrap();
}
