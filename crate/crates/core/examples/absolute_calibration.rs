//! Closed loop: inject a flat QE of 0.20 and recover it from coincidences.

use std::error::Error;

use iccd_calib::calib::{Acquisition, Calibrator};
use iccd_calib::{conjugate_region, Region, SimConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let config = SimConfig::closed_loop(11);
    let reference = Region::new(10, 29, 6, 6, "reference")?;
    let dut = conjugate_region(&reference, &config.geometry, 2)?;
    let calibrator = Calibrator::new(config.dut_channel(&dut)?);

    let acq = Acquisition::new(&config, 20_000, 300)?;
    for r in acq.calibrate(&reference, &dut, &[5, 50, 200], &calibrator, None)? {
        let s = &r.inputs;
        println!(
            "threshold {:>3}: N_Ref {:.4} dN_n {:.5} N_cc {:.5} N_acc {:.6} -> eta {:.3} +/- {:.3} (analytic {:.3})",
            r.threshold, s.n_ref, s.dn_noise, s.n_cc, s.n_acc, r.eta_corrected, r.sigma_eta, r.sigma_eta_analytic
        );
    }
    println!("injected QE: {}", config.true_qe.at(820.0));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
