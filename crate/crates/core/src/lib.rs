//! Monte Carlo simulation of an intensified single-photon camera illuminated by
//! SPDC photon pairs, and the autonomous absolute-calibration pipeline that
//! recovers the camera's quantum efficiency from its own frames.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`], [`optics`], [`frame`]: chip geometry, spectral bands and frame types.
//! * [`sim`]: the ground-truth frame generator.
//! * [`threshold`]: baseline subtraction, binarization and click-count sweeps.
//! * [`calib`]: coincidences, accidentals, the Klyshko estimator, g² maps and scans.
//! * [`cli`]: run configuration, the `ICDF` frame-file format and CSV/report output.

pub mod calib;
pub mod cli;
pub mod error;
pub mod frame;
pub mod geometry;
pub mod optics;
pub mod sim;
pub mod threshold;

pub use error::{Error, Result};
pub use frame::{bin_pixels, BinaryFrame, RawFrame};
pub use geometry::{conjugate_region, CameraGeometry, Region};
pub use optics::{conjugate_wavelength, OpticalChannel, WavelengthBand};
pub use sim::{simulate_run, SimConfig, Simulator};

/// Run `f` on a dedicated pool of `workers` threads (`None`: the global pool).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot build a {n}-thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
