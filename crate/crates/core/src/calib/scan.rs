//! Wavelength and pixel-uniformity scans built on the absolute estimator.

use std::borrow::Borrow;

use super::coincidence::check_disjoint;
use super::experiment::{calibrate_traces, Acquisition};
use super::{CalibrationResult, Calibrator, PeakTrace};
use crate::error::{Error, Result};
use crate::frame::RawFrame;
use crate::geometry::{conjugate_region, Region};
use crate::optics::WavelengthBand;
use crate::sim::SimConfig;
use crate::threshold::BaselineMap;

/// Acquisition layout shared by every point of a wavelength scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSetup {
    pub reference: Region,
    /// The DUT is the analytic conjugate of the reference grown by this margin.
    pub dut_margin: usize,
    pub n_frames: u64,
    pub baseline_frames: u64,
    /// Bootstrap settings; its channel is replaced by the configured DUT channel.
    pub calibrator: Calibrator,
}

/// One simulate-and-calibrate cycle per `(reference filter, DUT filter)` pair.
/// Results carry the conjugate of the reference band as `lambda_dut`.
pub fn wavelength_scan(
    plan: &[(WavelengthBand, WavelengthBand)],
    base: &SimConfig,
    threshold: i32,
    setup: &ScanSetup,
) -> Result<Vec<CalibrationResult>> {
    let g = &base.geometry;
    setup.reference.check_inside(g)?;
    let dut = conjugate_region(&setup.reference, g, setup.dut_margin)?;
    check_disjoint(&setup.reference, &dut)?;
    let mut configs = Vec::with_capacity(plan.len());
    for (reference, dut_band) in plan {
        let conj = reference.conjugate(base.lambda_pump)?;
        if !dut_band.covers(&conj) {
            return Err(Error::Config(format!(
                "conjugate band [{:.3}, {:.3}] nm of the {} nm reference lies outside the DUT filter [{:.3}, {:.3}] nm",
                conj.lower(),
                conj.upper(),
                reference.center(),
                dut_band.lower(),
                dut_band.upper()
            )));
        }
        let config = base.with_split_filters(*reference, *dut_band)?;
        if !config.filters[0].region.contains_region(&setup.reference) {
            return Err(Error::Config("reference region is not under the reference filter".into()));
        }
        config.validate()?;
        configs.push((config, conj));
    }
    configs
        .into_iter()
        .map(|(config, conj)| {
            let calibrator = setup.calibrator.with_channel(config.dut_channel(&dut)?);
            let acq = Acquisition::new(&config, setup.n_frames, setup.baseline_frames)?;
            let mut r = acq.calibrate(&setup.reference, &dut, &[threshold], &calibrator, Some(conj))?;
            Ok(r.remove(0))
        })
        .collect()
}

/// How each single-pixel DUT of a uniformity scan is heralded.
#[derive(Debug, Clone, PartialEq)]
pub enum UniformityReference {
    /// One extended reference for every pixel. A single pixel intercepts only part
    /// of the conjugate area, so values are meaningful relative to each other.
    Shared(Region),
    /// Each pixel is heralded by the pixel at its point reflection, dilated by
    /// `margin`. The capture fraction is then the same for every pixel, and the
    /// values are absolute when the correlation jitter is well below a pixel.
    PerPixelConjugate { margin: usize },
}

impl UniformityReference {
    pub fn reference_for(&self, pixel: &Region, geometry: &crate::geometry::CameraGeometry) -> Result<Region> {
        match self {
            UniformityReference::Shared(r) => Ok(r.clone()),
            UniformityReference::PerPixelConjugate { margin } => {
                Ok(conjugate_region(pixel, geometry, *margin)?.with_label("reference"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformityEntry {
    pub pixel: (usize, usize),
    pub reference: Region,
    pub result: CalibrationResult,
    /// `eta_corrected` over the scan mean.
    pub relative: f64,
    /// Deviation from the mean of the other pixels in combined standard errors.
    pub z_score: f64,
    /// `|z_score| > 3`.
    pub outlier: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformityScan {
    pub threshold: i32,
    pub entries: Vec<UniformityEntry>,
    /// Mean `eta_corrected` over all entries; NaN for an empty scan.
    pub mean_eta: f64,
}

impl UniformityScan {
    pub fn outliers(&self) -> impl Iterator<Item = &UniformityEntry> {
        self.entries.iter().filter(|e| e.outlier)
    }
}

fn single_pixel(x: usize, y: usize) -> Result<Region> {
    Region::new(x, y, 1, 1, format!("pixel {x},{y}"))
}

/// Regions `[ref_0, dut_0, ref_1, dut_1, ...]` for a pixel list.
fn scan_regions(
    reference: &UniformityReference,
    pixels: &[(usize, usize)],
    geometry: &crate::geometry::CameraGeometry,
) -> Result<Vec<Region>> {
    let mut regions = Vec::with_capacity(2 * pixels.len());
    for &(x, y) in pixels {
        let dut = single_pixel(x, y)?;
        dut.check_inside(geometry)?;
        let r = reference.reference_for(&dut, geometry)?;
        r.check_inside(geometry)?;
        check_disjoint(&r, &dut)?;
        regions.push(r);
        regions.push(dut);
    }
    Ok(regions)
}

/// Per-pixel estimates from peak traces laid out as `[ref_0, dut_0, ref_1, dut_1, ...]`.
pub fn uniformity_from_traces(
    signal: &PeakTrace,
    noise: &PeakTrace,
    threshold: i32,
    calibrator: &Calibrator,
) -> Result<UniformityScan> {
    let regions = signal.regions();
    if !regions.len().is_multiple_of(2) || noise.regions() != regions {
        return Err(Error::Domain("uniformity traces must hold matching reference/DUT pairs".into()));
    }
    let mut results = Vec::with_capacity(regions.len() / 2);
    for k in 0..regions.len() / 2 {
        let (r, d) = (2 * k, 2 * k + 1);
        let res = calibrator.calibrate(
            &signal.trace(r, d, threshold)?,
            &noise.trace(r, d, threshold)?,
            threshold,
            None,
        )?;
        let px = &regions[d];
        results.push(((px.x0(), px.y0()), regions[r].clone(), res));
    }
    let n = results.len();
    let total: f64 = results.iter().map(|(_, _, r)| r.eta_corrected).sum();
    let mean_eta = if n == 0 { f64::NAN } else { total / n as f64 };
    let entries = results
        .into_iter()
        .map(|(pixel, reference, result)| {
            let eta = result.eta_corrected;
            let z_score = if n > 1 {
                let others = (total - eta) / (n - 1) as f64;
                // Uncertainty of the leave-one-out mean from the typical per-pixel sigma.
                let var = result.sigma_eta.powi(2) * (1.0 + 1.0 / (n - 1) as f64);
                (eta - others) / var.sqrt()
            } else {
                0.0
            };
            UniformityEntry {
                pixel,
                reference,
                relative: eta / mean_eta,
                z_score,
                outlier: z_score.abs() > 3.0,
                result,
            }
        })
        .collect();
    Ok(UniformityScan {
        threshold,
        entries,
        mean_eta,
    })
}

/// Evaluate the estimator for each listed single-pixel DUT.
pub fn uniformity_scan<S, N>(
    signal_frames: S,
    noise_frames: N,
    baseline: &BaselineMap,
    threshold: i32,
    reference: &UniformityReference,
    pixels: &[(usize, usize)],
    calibrator: &Calibrator,
) -> Result<UniformityScan>
where
    S: IntoIterator,
    S::Item: Borrow<RawFrame>,
    N: IntoIterator,
    N::Item: Borrow<RawFrame>,
{
    if pixels.is_empty() {
        return Ok(UniformityScan {
            threshold,
            entries: Vec::new(),
            mean_eta: f64::NAN,
        });
    }
    let regions = scan_regions(reference, pixels, &baseline.geometry)?;
    let signal = PeakTrace::collect(signal_frames, baseline, &regions)?;
    let noise = PeakTrace::collect(noise_frames, baseline, &regions)?;
    uniformity_from_traces(&signal, &noise, threshold, calibrator)
}

impl Acquisition {
    /// Uniformity scan over the simulated runs without materializing frames.
    pub fn uniformity(
        &self,
        threshold: i32,
        reference: &UniformityReference,
        pixels: &[(usize, usize)],
        calibrator: &Calibrator,
    ) -> Result<UniformityScan> {
        if pixels.is_empty() {
            return Ok(UniformityScan {
                threshold,
                entries: Vec::new(),
                mean_eta: f64::NAN,
            });
        }
        let regions = scan_regions(reference, pixels, &self.baseline.geometry)?;
        let (signal, noise) = self.peaks(&regions)?;
        uniformity_from_traces(&signal, &noise, threshold, calibrator)
    }

    /// Absolute QE of `dut` heralded by `reference` at one threshold.
    pub fn calibrate_at(
        &self,
        reference: &Region,
        dut: &Region,
        threshold: i32,
        calibrator: &Calibrator,
    ) -> Result<CalibrationResult> {
        let (signal, noise) = self.peaks(&[reference.clone(), dut.clone()])?;
        Ok(calibrate_traces(&signal, &noise, &[threshold], calibrator, None)?.remove(0))
    }
}
