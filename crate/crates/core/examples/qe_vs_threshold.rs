//! Absolute QE at each threshold next to the relative curve rescaled at the
//! lowest threshold.

use std::error::Error;

use iccd_calib::calib::{rescale_relative, Acquisition, Calibrator};
use iccd_calib::{conjugate_region, Region, SimConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut config = SimConfig::closed_loop(4);
    config.pair_rate = 10.0;
    config.signal_amp_mean = 150.0;
    config.noise_amp_mean = 25.0;
    config.readout_noise_sigma = 8.0;
    let reference = Region::new(10, 29, 6, 6, "reference")?;
    let dut = conjugate_region(&reference, &config.geometry, 2)?;
    let thresholds = [45, 60, 80, 100, 120];
    let calibrator = Calibrator::new(config.dut_channel(&dut)?);

    let acq = Acquisition::new(&config, 30_000, 300)?;
    let absolute = acq.calibrate(&reference, &dut, &thresholds, &calibrator, None)?;
    let relative = rescale_relative(&acq.sweep(&dut, &thresholds)?.relative_qe(), 45, absolute[0].eta_corrected)?;

    println!("threshold  absolute        relative  DUT clicks/frame");
    for (r, rel) in absolute.iter().zip(&relative.values) {
        println!(
            "{:>9}  {:.3} +/- {:.3}  {:.3}     {:.3}",
            r.threshold, r.eta_corrected, r.sigma_eta, rel, r.inputs.n_dut
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
