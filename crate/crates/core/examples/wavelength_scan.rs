//! Swap reference filters to measure QE at several conjugate wavelengths.

use std::error::Error;

use iccd_calib::calib::{wavelength_scan, Calibrator, ScanSetup};
use iccd_calib::sim::QeTable;
use iccd_calib::{OpticalChannel, Region, SimConfig, WavelengthBand};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut base = SimConfig::closed_loop(5);
    base.spdc_band = WavelengthBand::from_edges(765.0, 810.0)?;
    base.pair_rate = 10.0;
    base.true_qe = QeTable::linear(740.0, 890.0, 0.30, 0.10)?;
    let band = |c: f64, w: f64| WavelengthBand::new(c, w, 1.0);
    let plan = [
        (band(770.0, 10.0)?, band(850.0, 30.0)?),
        (band(780.0, 10.0)?, band(850.0, 30.0)?),
        (band(790.0, 10.0)?, band(825.0, 30.0)?),
        (band(800.0, 10.0)?, band(825.0, 30.0)?),
    ];
    let setup = ScanSetup {
        reference: Region::new(10, 29, 6, 6, "reference")?,
        dut_margin: 2,
        n_frames: 20_000,
        baseline_frames: 300,
        calibrator: Calibrator::new(OpticalChannel::ideal()),
    };
    for r in wavelength_scan(&plan, &base, 5, &setup)? {
        let b = r.lambda_dut.expect("scan results carry the DUT band");
        println!(
            "DUT at {:.1} nm: eta {:.3} +/- {:.3}, configured {:.3}",
            b.center(),
            r.eta_corrected,
            r.sigma_eta,
            base.true_qe.at(b.center())
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
