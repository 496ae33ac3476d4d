//! Simulate-then-calibrate pipeline over a pump-on and a pump-off run.
//!
//! All reductions are integer sums folded in parallel, so results do not depend
//! on the worker count.

use rayon::prelude::*;

use super::{Calibrator, CalibrationResult, CorrelationMap, G2Accumulator, PeakTrace};
use crate::error::{Error, Result};
use crate::geometry::Region;
use crate::optics::WavelengthBand;
use crate::sim::{SimConfig, Simulator};
use crate::threshold::{BaselineMap, SnrSweep, SweepAccumulator};

/// First frame index of the pump-off frames used for the baseline, far from
/// the indices of any analysed run.
pub const BASELINE_OFFSET: u64 = 1 << 40;

/// Baseline map from `n` pump-off frames of `sim` starting at `start`.
pub fn simulated_baseline(sim: &Simulator, start: u64, n: u64) -> Result<BaselineMap> {
    if n == 0 {
        return Err(Error::Empty("no dark frames for the baseline"));
    }
    let g = sim.config().geometry.clone();
    let np = g.pixel_count();
    let sums = (start..start + n)
        .into_par_iter()
        .fold(
            || vec![0u64; np],
            |mut acc, i| {
                for (s, &v) in acc.iter_mut().zip(&sim.frame(i).values) {
                    *s += v as u64;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; np],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    BaselineMap::new(g, sums.into_iter().map(|s| s as f64 / n as f64).collect(), n)
}

/// A simulated pump-on run, the matching pump-off run and their baseline.
#[derive(Debug, Clone)]
pub struct Acquisition {
    pub signal: Simulator,
    pub noise: Simulator,
    pub baseline: BaselineMap,
    pub n_frames: u64,
}

impl Acquisition {
    /// Runs of `n_frames` each; the baseline comes from `baseline_frames` extra
    /// pump-off frames.
    pub fn new(config: &SimConfig, n_frames: u64, baseline_frames: u64) -> Result<Self> {
        if n_frames < 2 {
            return Err(Error::Config("an acquisition needs at least 2 frames".into()));
        }
        let signal = Simulator::new(config.with_pump(true))?;
        let noise = Simulator::new(config.with_pump(false))?;
        let baseline = simulated_baseline(&noise, BASELINE_OFFSET, baseline_frames)?;
        Ok(Acquisition {
            signal,
            noise,
            baseline,
            n_frames,
        })
    }

    pub fn config(&self) -> &SimConfig {
        self.signal.config()
    }

    /// Region peaks of the pump-on and pump-off runs.
    pub fn peaks(&self, regions: &[Region]) -> Result<(PeakTrace, PeakTrace)> {
        Ok((
            PeakTrace::simulate(&self.signal, 0, self.n_frames, &self.baseline, regions)?,
            PeakTrace::simulate(&self.noise, 0, self.n_frames, &self.baseline, regions)?,
        ))
    }

    fn rates(&self, sim: &Simulator, region: &Region, thresholds: &[i32]) -> Result<Vec<f64>> {
        region.check_inside(&self.baseline.geometry)?;
        let empty = SweepAccumulator::new(thresholds)?;
        let acc = (0..self.n_frames)
            .into_par_iter()
            .try_fold(
                || empty.clone(),
                |mut acc, i| {
                    acc.push(&sim.frame(i), &self.baseline, region)?;
                    Ok::<_, Error>(acc)
                },
            )
            .try_reduce(|| empty.clone(), |a, b| Ok(a.merge(&b)))?;
        acc.rates()
    }

    /// Per-pixel click rates of `region` versus threshold for both runs.
    pub fn sweep(&self, region: &Region, thresholds: &[i32]) -> Result<SnrSweep> {
        let signal = self.rates(&self.signal, region, thresholds)?;
        let noise = self.rates(&self.noise, region, thresholds)?;
        SnrSweep::from_rates(thresholds, signal, noise)
    }

    /// g2 map of the pump-on run against `reference`.
    pub fn g2_map(&self, reference: &Region, threshold: i32) -> Result<CorrelationMap> {
        let g = &self.baseline.geometry;
        let empty = G2Accumulator::new(g, reference, threshold)?;
        (0..self.n_frames)
            .into_par_iter()
            .try_fold(
                || empty.clone(),
                |mut acc, i| {
                    acc.push_raw(&self.signal.frame(i), &self.baseline)?;
                    Ok::<_, Error>(acc)
                },
            )
            .try_reduce(|| empty.clone(), |a, b| Ok(a.merge(&b)))?
            .finish()
    }

    /// Absolute QE of `dut` heralded by `reference`, one result per threshold.
    pub fn calibrate(
        &self,
        reference: &Region,
        dut: &Region,
        thresholds: &[i32],
        calibrator: &Calibrator,
        lambda_dut: Option<WavelengthBand>,
    ) -> Result<Vec<CalibrationResult>> {
        let (signal, noise) = self.peaks(&[reference.clone(), dut.clone()])?;
        calibrate_traces(&signal, &noise, thresholds, calibrator, lambda_dut)
    }
}

/// Calibrate region 1 of two-region peak traces against region 0 at each threshold.
pub fn calibrate_traces(
    signal: &PeakTrace,
    noise: &PeakTrace,
    thresholds: &[i32],
    calibrator: &Calibrator,
    lambda_dut: Option<WavelengthBand>,
) -> Result<Vec<CalibrationResult>> {
    if signal.regions().len() < 2 || noise.regions() != signal.regions() {
        return Err(Error::Domain("peak traces must share a reference and a DUT region".into()));
    }
    thresholds
        .iter()
        .map(|&s| calibrator.calibrate(&signal.trace(0, 1, s)?, &noise.trace(0, 1, s)?, s, lambda_dut))
        .collect()
}
