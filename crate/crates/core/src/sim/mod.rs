//! Ground-truth Monte Carlo of an SPDC pair source imaged by a gated,
//! intensified single-photon camera.
//!
//! The chain per photon is: spatial filter lookup → filter band and
//! transmission → channel loss → quantum efficiency → exponential pulse
//! height → Gaussian charge splat. Dark and stray-light events, a static
//! per-pixel baseline and Gaussian readout noise are added on top.

mod engine;
pub mod rng;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraGeometry, Region};
use crate::optics::{conjugate_wavelength, OpticalChannel, WavelengthBand};

pub use engine::{simulate_run, Deposit, DepositKind, FrameStream, RenderTrace, Simulator};

/// Detection probability versus wavelength, linearly interpolated between
/// knots. Undefined outside the knot range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct QeTable {
    knots: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for QeTable {
    type Error = Error;

    fn try_from(knots: Vec<(f64, f64)>) -> Result<Self> {
        QeTable::new(knots)
    }
}

impl From<QeTable> for Vec<(f64, f64)> {
    fn from(t: QeTable) -> Self {
        t.knots
    }
}

impl QeTable {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Config("QE table needs at least two knots".into()));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Config("QE table wavelengths must be strictly ascending".into()));
            }
        }
        if let Some(&(l, q)) = knots.iter().find(|(_, q)| !(0.0..=1.0).contains(q)) {
            return Err(Error::Config(format!("QE at {l} nm must lie in [0, 1], got {q}")));
        }
        Ok(QeTable { knots })
    }

    /// Constant QE over `[lower, upper]`.
    pub fn flat(qe: f64, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![(lower, qe), (upper, qe)])
    }

    /// Straight line from `qe_lower` at `lower` to `qe_upper` at `upper`.
    pub fn linear(lower: f64, upper: f64, qe_lower: f64, qe_upper: f64) -> Result<Self> {
        Self::new(vec![(lower, qe_lower), (upper, qe_upper)])
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn range(&self) -> (f64, f64) {
        (self.knots[0].0, self.knots[self.knots.len() - 1].0)
    }

    pub fn covers(&self, lower: f64, upper: f64) -> bool {
        let (a, b) = self.range();
        lower >= a - 1e-9 && upper <= b + 1e-9
    }

    /// Interpolated QE; clamps to the end knots just outside the range.
    pub fn at(&self, lambda: f64) -> f64 {
        let k = &self.knots;
        let i = k.partition_point(|&(l, _)| l < lambda);
        if i == 0 {
            return k[0].1;
        }
        if i >= k.len() {
            return k[k.len() - 1].1;
        }
        let (l0, q0) = k[i - 1];
        let (l1, q1) = k[i];
        q0 + (q1 - q0) * (lambda - l0) / (l1 - l0)
    }
}

/// Bandpass filter in front of a rectangular part of the chip.
#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    pub region: Region,
    pub band: WavelengthBand,
}

/// Pixel whose detection probability is scaled by `factor` (sensitivity defect).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QeDefect {
    pub x: usize,
    pub y: usize,
    pub factor: f64,
}

/// Complete ground-truth description of a simulated acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub geometry: CameraGeometry,
    /// Mean photon pairs per gate.
    pub pair_rate: f64,
    /// `false` reproduces the rotated-pump setting: no pairs, noise unchanged.
    pub pump_on: bool,
    pub lambda_pump: f64,
    /// Signal wavelengths are drawn uniformly over this band.
    pub spdc_band: WavelengthBand,
    pub true_qe: QeTable,
    pub channel: OpticalChannel,
    pub filters: Vec<Filter>,
    /// Gaussian spread (pixels) of the idler around the reflected signal position.
    pub corr_jitter_sigma: f64,
    /// Gaussian spread (pixels) of signal positions around the beam center.
    pub beam_profile_sigma: f64,
    pub signal_amp_mean: f64,
    pub noise_amp_mean: f64,
    /// Spurious intensifier events per pixel per gate.
    pub dark_event_rate: f64,
    /// Detected ambient-light events per pixel per gate (signal pulse-height law,
    /// independent of the pump).
    pub stray_light_rate: f64,
    pub splat_sigma: f64,
    /// Inclusive range of the static integer per-pixel baseline (ADU).
    pub baseline_range: (u16, u16),
    pub readout_noise_sigma: f64,
    /// Record-keeping only; the amplitude means already encode the gain.
    pub mcp_gain_setting: u32,
    pub qe_defects: Vec<QeDefect>,
    pub seed: u64,
}

impl SimConfig {
    /// Desk-scale configuration of a typical acquisition: 8×8 binning,
    /// a 780 nm reference filter on the left half, an 850 nm / 40 nm filter on the
    /// right half, an 88 % optical channel and baselines of 600–650 ADU.
    pub fn desk_scale(seed: u64) -> Self {
        let geometry = CameraGeometry::new(64, 64, 8, (32.0, 32.0)).expect("static geometry");
        let left = Region::new(0, 0, 32, 64, "reference side").expect("static region");
        let right = Region::new(32, 0, 32, 64, "dut side").expect("static region");
        SimConfig {
            geometry,
            pair_rate: 20.0,
            pump_on: true,
            lambda_pump: 405.0,
            spdc_band: WavelengthBand::from_edges(765.0, 835.0).expect("static band"),
            true_qe: QeTable::new(vec![(700.0, 0.30), (800.0, 0.28), (900.0, 0.18)]).expect("static table"),
            channel: OpticalChannel::single("optical channel", 0.88).expect("static channel"),
            filters: vec![
                Filter {
                    region: left,
                    band: WavelengthBand::new(780.0, 10.0, 0.94).expect("static band"),
                },
                Filter {
                    region: right,
                    band: WavelengthBand::new(850.0, 40.0, 0.95).expect("static band"),
                },
            ],
            corr_jitter_sigma: 0.7,
            beam_profile_sigma: 14.0,
            signal_amp_mean: 150.0,
            noise_amp_mean: 25.0,
            dark_event_rate: 1e-3,
            stray_light_rate: 2e-4,
            splat_sigma: 0.5,
            baseline_range: (600, 650),
            readout_noise_sigma: 8.0,
            mcp_gain_setting: 100,
            qe_defects: Vec::new(),
            seed,
        }
    }

    /// Non-saturating configuration for closed-loop QE recovery: flat QE 0.20,
    /// 88 % channel, a one-sided 795–810 nm signal band with an 800/10 nm
    /// reference filter and a unit-transmission 820.25/14 nm DUT filter that
    /// covers the conjugate band. A 6×6 reference near `(10, 29)` heralds about
    /// one frame in a hundred.
    pub fn closed_loop(seed: u64) -> Self {
        let base = SimConfig {
            pair_rate: 5.0,
            spdc_band: WavelengthBand::from_edges(795.0, 810.0).expect("static band"),
            true_qe: QeTable::flat(0.20, 700.0, 900.0).expect("static table"),
            signal_amp_mean: 2000.0,
            noise_amp_mean: 200.0,
            readout_noise_sigma: 1.0,
            splat_sigma: 0.3,
            corr_jitter_sigma: 0.5,
            dark_event_rate: 2e-5,
            stray_light_rate: 1e-5,
            ..SimConfig::desk_scale(seed)
        };
        base.with_split_filters(
            WavelengthBand::new(800.0, 10.0, 0.9).expect("static band"),
            WavelengthBand::new(820.25, 14.0, 1.0).expect("static band"),
        )
        .expect("beam center splits the static geometry")
    }

    pub fn with_pump(&self, pump_on: bool) -> Self {
        SimConfig {
            pump_on,
            ..self.clone()
        }
    }

    /// Replace the filters by a reference band over the columns left of the beam
    /// center and a DUT band over the remaining columns.
    pub fn with_split_filters(&self, reference: WavelengthBand, dut: WavelengthBand) -> Result<Self> {
        let g = &self.geometry;
        let split = g.beam_center().0.round() as usize;
        if split == 0 || split >= g.width() {
            return Err(Error::Config("beam center too close to the frame edge to split filters".into()));
        }
        let left = Region::new(0, 0, split, g.height(), "reference side")?;
        let right = Region::new(split, 0, g.width() - split, g.height(), "dut side")?;
        Ok(SimConfig {
            filters: vec![
                Filter {
                    region: left,
                    band: reference,
                },
                Filter { region: right, band: dut },
            ],
            ..self.clone()
        })
    }

    /// Every wavelength the source can emit: signals span `spdc_band`, idlers its conjugate.
    pub fn emitted_range(&self) -> Result<(f64, f64)> {
        let conj = self.spdc_band.conjugate(self.lambda_pump)?;
        Ok((
            self.spdc_band.lower().min(conj.lower()),
            self.spdc_band.upper().max(conj.upper()),
        ))
    }

    /// Optical channel seen by photons reaching the DUT area: the shared channel
    /// followed by the filter covering `dut`.
    pub fn dut_channel(&self, dut: &Region) -> Result<OpticalChannel> {
        let filter = self
            .filters
            .iter()
            .find(|f| f.region.contains_region(dut))
            .ok_or_else(|| Error::Config(format!("no single filter covers DUT region {dut}")))?;
        self.channel.with_element("dut filter", filter.band.transmission())
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")))
            }
        };
        nonneg("pair_rate", self.pair_rate)?;
        nonneg("dark_event_rate", self.dark_event_rate)?;
        nonneg("stray_light_rate", self.stray_light_rate)?;
        nonneg("corr_jitter_sigma", self.corr_jitter_sigma)?;
        nonneg("beam_profile_sigma", self.beam_profile_sigma)?;
        nonneg("splat_sigma", self.splat_sigma)?;
        nonneg("readout_noise_sigma", self.readout_noise_sigma)?;
        if !(self.signal_amp_mean > 0.0 && self.signal_amp_mean.is_finite()) {
            return Err(Error::Config("signal_amp_mean must be > 0".into()));
        }
        if !(self.noise_amp_mean > 0.0 && self.noise_amp_mean < self.signal_amp_mean) {
            return Err(Error::Config(format!(
                "noise_amp_mean must lie in (0, signal_amp_mean = {}), got {}",
                self.signal_amp_mean, self.noise_amp_mean
            )));
        }
        if self.baseline_range.0 > self.baseline_range.1 {
            return Err(Error::Config("baseline_range lower bound exceeds upper bound".into()));
        }
        if !(self.lambda_pump > 0.0) || self.spdc_band.lower() <= self.lambda_pump {
            return Err(Error::Config(format!(
                "SPDC band must lie above the {} nm pump",
                self.lambda_pump
            )));
        }
        let (lo, hi) = self.emitted_range()?;
        if !self.true_qe.covers(lo, hi) {
            let (a, b) = self.true_qe.range();
            return Err(Error::Config(format!(
                "true_qe defined on [{a}, {b}] nm but the source emits [{lo:.3}, {hi:.3}] nm"
            )));
        }
        for f in &self.filters {
            f.region.check_inside(&self.geometry)?;
        }
        for d in &self.qe_defects {
            if d.x >= self.geometry.width() || d.y >= self.geometry.height() {
                return Err(Error::Config(format!("QE defect at ({}, {}) is off the chip", d.x, d.y)));
            }
            if !(d.factor >= 0.0) {
                return Err(Error::Config("QE defect factor must be >= 0".into()));
            }
        }
        Ok(())
    }
}

/// One down-converted photon pair on the continuous chip plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEvent {
    pub signal_pos: (f64, f64),
    pub idler_pos: (f64, f64),
    pub signal_lambda: f64,
    pub idler_lambda: f64,
}

impl PairEvent {
    /// Twin of a signal photon: reflected through the beam center and displaced by `jitter`;
    /// the idler wavelength follows from energy conservation.
    pub fn from_signal(
        geometry: &CameraGeometry,
        lambda_pump: f64,
        signal_pos: (f64, f64),
        signal_lambda: f64,
        jitter: (f64, f64),
    ) -> Result<Self> {
        let (rx, ry) = geometry.reflect(signal_pos);
        Ok(PairEvent {
            signal_pos,
            idler_pos: (rx + jitter.0, ry + jitter.1),
            signal_lambda,
            idler_lambda: conjugate_wavelength(signal_lambda, lambda_pump)?,
        })
    }
}

/// Pairs generated in gate `frame_index`.
pub fn sample_pair_events(config: &SimConfig, frame_index: u64) -> Result<Vec<PairEvent>> {
    Ok(Simulator::new(config.clone())?.sample_pair_events(frame_index))
}

/// Render one gate from a list of pairs.
pub fn render_frame(config: &SimConfig, events: &[PairEvent], frame_index: u64) -> Result<crate::frame::RawFrame> {
    Ok(Simulator::new(config.clone())?.render_frame(events, frame_index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qe_interpolation() {
        let t = QeTable::linear(750.0, 850.0, 0.25, 0.05).unwrap();
        assert!((t.at(800.0) - 0.15).abs() < 1e-12);
        assert_eq!(t.at(700.0), 0.25);
        assert!(QeTable::new(vec![(800.0, 0.1)]).is_err());
        assert!(QeTable::new(vec![(800.0, 0.1), (790.0, 0.2)]).is_err());
        assert!(QeTable::flat(1.5, 700.0, 900.0).is_err());
    }

    #[test]
    fn desk_scale_is_valid() {
        let c = SimConfig::desk_scale(1);
        c.validate().unwrap();
        assert_eq!(c.channel.total_transmission(), 0.88);
        assert_eq!(c.baseline_range, (600, 650));
        assert_eq!(c.mcp_gain_setting, 100);
    }

    #[test]
    fn validation_failures() {
        let base = SimConfig::desk_scale(1);
        let mut c = base.clone();
        c.noise_amp_mean = c.signal_amp_mean;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.pair_rate = -1.0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.true_qe = QeTable::flat(0.2, 790.0, 830.0).unwrap();
        assert!(c.validate().is_err());
        let mut c = base;
        c.qe_defects.push(QeDefect { x: 64, y: 0, factor: 0.5 });
        assert!(c.validate().is_err());
    }

    #[test]
    fn idler_is_point_reflection() {
        let g = CameraGeometry::new(64, 64, 1, (32.0, 32.0)).unwrap();
        let p = PairEvent::from_signal(&g, 405.0, (30.0, 31.0), 800.0, (0.0, 0.0)).unwrap();
        assert_eq!(p.idler_pos, (34.0, 33.0));
        let lhs = 1.0 / p.signal_lambda + 1.0 / p.idler_lambda;
        assert!((lhs - 1.0 / 405.0).abs() <= 1e-9 / 405.0);
    }

    #[test]
    fn split_filters() {
        let c = SimConfig::desk_scale(0)
            .with_split_filters(
                WavelengthBand::new(800.0, 10.0, 1.0).unwrap(),
                WavelengthBand::new(820.0, 20.0, 0.9).unwrap(),
            )
            .unwrap();
        assert_eq!(c.filters[0].region.x1(), 32);
        assert_eq!(c.filters[1].region.x0(), 32);
        let dut = Region::new(40, 20, 8, 8, "dut").unwrap();
        assert!((c.dut_channel(&dut).unwrap().total_transmission() - 0.88 * 0.9).abs() < 1e-15);
        let straddling = Region::new(28, 20, 8, 8, "dut").unwrap();
        assert!(c.dut_channel(&straddling).is_err());
    }
}
