//! Single-pixel DUTs heralded by their own conjugate pixels, with one weak pixel.

use std::error::Error;

use iccd_calib::calib::{Acquisition, Calibrator, UniformityReference};
use iccd_calib::cli::commands::default_uniformity_pixels;
use iccd_calib::sim::QeDefect;
use iccd_calib::{Region, SimConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut config = SimConfig::closed_loop(6);
    config.pair_rate = 40.0;
    let reference = Region::new(26, 26, 6, 6, "reference")?;
    let pixels = default_uniformity_pixels(&reference, &config.geometry, 12)?;
    config.qe_defects.push(QeDefect {
        x: pixels[0].0,
        y: pixels[0].1,
        factor: 0.5,
    });
    let dut = Region::new(pixels[0].0, pixels[0].1, 1, 1, "dut")?;
    let calibrator = Calibrator::new(config.dut_channel(&dut)?);

    let acq = Acquisition::new(&config, 20_000, 200)?;
    let scan = acq.uniformity(5, &UniformityReference::PerPixelConjugate { margin: 0 }, &pixels, &calibrator)?;
    for e in &scan.entries {
        println!(
            "pixel {:?}: eta {:.3} +/- {:.3}, relative {:.2}, z {:+.1}{}",
            e.pixel,
            e.result.eta_corrected,
            e.result.sigma_eta,
            e.relative,
            e.z_score,
            if e.outlier { "  <- outlier" } else { "" }
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
