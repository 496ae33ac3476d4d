//! Click rates, SNR and the relative QE curve of the DUT half versus threshold.

use std::error::Error;

use iccd_calib::calib::Acquisition;
use iccd_calib::cli::parse_threshold_range;
use iccd_calib::{Region, SimConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let config = SimConfig::desk_scale(1);
    let acq = Acquisition::new(&config, 3_000, 300)?;
    let region = Region::new(40, 24, 16, 16, "dut side")?;
    let thresholds = parse_threshold_range("45:125:5")?;
    let sweep = acq.sweep(&region, &thresholds)?;
    let relative = sweep.relative_qe();

    println!("threshold  signal      noise       snr     relative");
    for (k, s) in thresholds.iter().enumerate() {
        println!(
            "{s:>9}  {:.3e}  {:.3e}  {:>6.1}  {:.3e}",
            sweep.signal.values[k], sweep.noise.values[k], sweep.snr.values[k], relative.values[k]
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
