//! `RunConfig`: the TOML run description read by every simulating command.
//!
//! ```toml
//! [geometry]
//! width = 64
//! height = 64
//! binning = 8
//! beam_center = [32.0, 32.0]
//!
//! [source]
//! pair_rate = 20.0
//! pump_on = true
//! lambda_pump_nm = 405.0
//! spdc_band_nm = [765.0, 835.0]
//! corr_jitter_sigma = 0.7
//! beam_profile_sigma = 14.0
//!
//! [detector]
//! true_qe = [[700.0, 0.30], [800.0, 0.28], [900.0, 0.18]]
//! channel = [{ name = "optical channel", transmission = 0.88 }]
//! signal_amp_mean = 150.0
//! noise_amp_mean = 25.0
//! splat_sigma = 0.5
//! readout_noise_sigma = 8.0
//! baseline_range = [600, 650]
//! mcp_gain_setting = 100
//! qe_defects = []
//!
//! [noise]
//! dark_event_rate = 1e-3
//! stray_light_rate = 2e-4
//!
//! [filters]
//! entries = [
//!   { region = "0,0,32x64", center_nm = 780.0, fwhm_nm = 10.0, transmission = 0.94 },
//!   { region = "32,0,32x64", center_nm = 850.0, fwhm_nm = 40.0, transmission = 0.95 },
//! ]
//!
//! [analysis]
//! seed = 0
//! frames = 100000
//! ...
//! ```
//!
//! Every key is optional and defaults to the values above; unknown keys are errors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraGeometry, Region};
use crate::optics::{OpticalChannel, WavelengthBand};
use crate::sim::{Filter, QeDefect, QeTable, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub width: usize,
    pub height: usize,
    pub binning: u32,
    pub beam_center: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    pub pair_rate: f64,
    pub pump_on: bool,
    pub lambda_pump_nm: f64,
    pub spdc_band_nm: [f64; 2],
    pub corr_jitter_sigma: f64,
    pub beam_profile_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelElement {
    pub name: String,
    pub transmission: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectEntry {
    pub x: usize,
    pub y: usize,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    /// `(wavelength nm, QE)` knots, linearly interpolated.
    pub true_qe: Vec<[f64; 2]>,
    pub channel: Vec<ChannelElement>,
    pub signal_amp_mean: f64,
    pub noise_amp_mean: f64,
    pub splat_sigma: f64,
    pub readout_noise_sigma: f64,
    pub baseline_range: [u16; 2],
    pub mcp_gain_setting: u32,
    pub qe_defects: Vec<DefectEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub dark_event_rate: f64,
    pub stray_light_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandEntry {
    pub center_nm: f64,
    pub fwhm_nm: f64,
    #[serde(default = "unit")]
    pub transmission: f64,
}

fn unit() -> f64 {
    1.0
}

impl BandEntry {
    pub fn band(&self) -> Result<WavelengthBand> {
        WavelengthBand::new(self.center_nm, self.fwhm_nm, self.transmission)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterEntry {
    /// `"x0,y0,wxh"`.
    pub region: String,
    pub center_nm: f64,
    pub fwhm_nm: f64,
    #[serde(default = "unit")]
    pub transmission: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiltersSection {
    pub entries: Vec<FilterEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanEntry {
    pub reference: BandEntry,
    pub dut: BandEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub seed: u64,
    /// Frames per run (pump on and pump off each).
    pub frames: u64,
    /// Extra pump-off frames averaged into the baseline.
    pub baseline_frames: u64,
    /// Reference region, `"x0,y0,wxh"`.
    pub reference: String,
    /// `"auto"` for the conjugate region of the reference, or `"x0,y0,wxh"`.
    pub dut: String,
    pub dut_margin: usize,
    /// Threshold of calibrations, g2 maps and scans (ADU).
    pub threshold: i32,
    /// Sweep thresholds, `"a:b:step"` with `b` exclusive.
    pub thresholds: String,
    pub bootstrap_blocks: usize,
    pub bootstrap_resamples: usize,
    pub wavelength_plan: Vec<PlanEntry>,
    /// `"relative"` (shared reference) or `"absolute"` (per-pixel conjugate reference).
    pub uniformity_mode: String,
    /// Explicit `[x, y]` DUT pixels; empty selects the pixels nearest the DUT center.
    pub uniformity_pixels: Vec<[usize; 2]>,
    pub uniformity_count: usize,
    pub output_dir: String,
}

/// Complete run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometrySection,
    pub source: SourceSection,
    pub detector: DetectorSection,
    pub noise: NoiseSection,
    pub filters: FiltersSection,
    pub analysis: AnalysisSection,
}

fn band_entry(center: f64, fwhm: f64) -> BandEntry {
    BandEntry {
        center_nm: center,
        fwhm_nm: fwhm,
        transmission: 0.95,
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_sim(&SimConfig::desk_scale(0))
    }
}

macro_rules! section_default {
    ($t:ty, $field:ident) => {
        impl Default for $t {
            fn default() -> Self {
                RunConfig::default().$field
            }
        }
    };
}

section_default!(GeometrySection, geometry);
section_default!(SourceSection, source);
section_default!(DetectorSection, detector);
section_default!(NoiseSection, noise);
section_default!(FiltersSection, filters);

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            seed: 0,
            frames: 100_000,
            baseline_frames: 2_000,
            reference: "8,29,6x6".into(),
            dut: "auto".into(),
            dut_margin: 3,
            threshold: 80,
            thresholds: "45:125:5".into(),
            bootstrap_blocks: 100,
            bootstrap_resamples: 400,
            wavelength_plan: vec![
                PlanEntry {
                    reference: band_entry(770.0, 10.0),
                    dut: band_entry(850.0, 40.0),
                },
                PlanEntry {
                    reference: band_entry(780.0, 10.0),
                    dut: band_entry(850.0, 40.0),
                },
                PlanEntry {
                    reference: band_entry(810.0, 10.0),
                    dut: band_entry(800.0, 40.0),
                },
                PlanEntry {
                    reference: band_entry(830.0, 10.0),
                    dut: band_entry(800.0, 40.0),
                },
            ],
            uniformity_mode: "relative".into(),
            uniformity_pixels: Vec::new(),
            uniformity_count: 43,
            output_dir: "out".into(),
        }
    }
}

impl RunConfig {
    /// Simulator half of a run description; the analysis section takes defaults.
    pub fn from_sim(c: &SimConfig) -> Self {
        let g = &c.geometry;
        RunConfig {
            geometry: GeometrySection {
                width: g.width(),
                height: g.height(),
                binning: g.binning(),
                beam_center: [g.beam_center().0, g.beam_center().1],
            },
            source: SourceSection {
                pair_rate: c.pair_rate,
                pump_on: c.pump_on,
                lambda_pump_nm: c.lambda_pump,
                spdc_band_nm: [c.spdc_band.lower(), c.spdc_band.upper()],
                corr_jitter_sigma: c.corr_jitter_sigma,
                beam_profile_sigma: c.beam_profile_sigma,
            },
            detector: DetectorSection {
                true_qe: c.true_qe.knots().iter().map(|&(l, q)| [l, q]).collect(),
                channel: c
                    .channel
                    .elements()
                    .iter()
                    .map(|(name, t)| ChannelElement {
                        name: name.clone(),
                        transmission: *t,
                    })
                    .collect(),
                signal_amp_mean: c.signal_amp_mean,
                noise_amp_mean: c.noise_amp_mean,
                splat_sigma: c.splat_sigma,
                readout_noise_sigma: c.readout_noise_sigma,
                baseline_range: [c.baseline_range.0, c.baseline_range.1],
                mcp_gain_setting: c.mcp_gain_setting,
                qe_defects: c
                    .qe_defects
                    .iter()
                    .map(|d| DefectEntry {
                        x: d.x,
                        y: d.y,
                        factor: d.factor,
                    })
                    .collect(),
            },
            noise: NoiseSection {
                dark_event_rate: c.dark_event_rate,
                stray_light_rate: c.stray_light_rate,
            },
            filters: FiltersSection {
                entries: c
                    .filters
                    .iter()
                    .map(|f| FilterEntry {
                        region: f.region.to_string(),
                        center_nm: f.band.center(),
                        fwhm_nm: f.band.fwhm(),
                        transmission: f.band.transmission(),
                    })
                    .collect(),
            },
            analysis: AnalysisSection {
                seed: c.seed,
                ..AnalysisSection::default()
            },
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.sim_config()?;
        c.reference()?;
        c.dut()?;
        c.sweep_thresholds()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text)
    }

    /// The fully resolved document, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }

    /// Write the resolved document to `path`.
    pub fn echo(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let geometry = CameraGeometry::new(
            self.geometry.width,
            self.geometry.height,
            self.geometry.binning,
            (self.geometry.beam_center[0], self.geometry.beam_center[1]),
        )?;
        let d = &self.detector;
        let channel = OpticalChannel::new(d.channel.iter().map(|e| (e.name.clone(), e.transmission)).collect())?;
        let filters = self
            .filters
            .entries
            .iter()
            .map(|f| {
                Ok(Filter {
                    region: parse_region(&f.region, "filter")?,
                    band: WavelengthBand::new(f.center_nm, f.fwhm_nm, f.transmission)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if filters.len() > 255 {
            return Err(Error::Config("at most 255 filters are supported".into()));
        }
        let s = &self.source;
        let c = SimConfig {
            geometry,
            pair_rate: s.pair_rate,
            pump_on: s.pump_on,
            lambda_pump: s.lambda_pump_nm,
            spdc_band: WavelengthBand::from_edges(s.spdc_band_nm[0], s.spdc_band_nm[1])?,
            true_qe: QeTable::new(d.true_qe.iter().map(|k| (k[0], k[1])).collect())?,
            channel,
            filters,
            corr_jitter_sigma: s.corr_jitter_sigma,
            beam_profile_sigma: s.beam_profile_sigma,
            signal_amp_mean: d.signal_amp_mean,
            noise_amp_mean: d.noise_amp_mean,
            dark_event_rate: self.noise.dark_event_rate,
            stray_light_rate: self.noise.stray_light_rate,
            splat_sigma: d.splat_sigma,
            baseline_range: (d.baseline_range[0], d.baseline_range[1]),
            readout_noise_sigma: d.readout_noise_sigma,
            mcp_gain_setting: d.mcp_gain_setting,
            qe_defects: d
                .qe_defects
                .iter()
                .map(|e| QeDefect {
                    x: e.x,
                    y: e.y,
                    factor: e.factor,
                })
                .collect(),
            seed: self.analysis.seed,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn reference(&self) -> Result<Region> {
        Ok(parse_region(&self.analysis.reference, "reference")?.with_label("reference"))
    }

    /// `None` for `"auto"`.
    pub fn dut(&self) -> Result<Option<Region>> {
        if self.analysis.dut.trim() == "auto" {
            Ok(None)
        } else {
            Ok(Some(parse_region(&self.analysis.dut, "dut")?.with_label("dut")))
        }
    }

    pub fn sweep_thresholds(&self) -> Result<Vec<i32>> {
        parse_threshold_range(&self.analysis.thresholds)
    }

    pub fn wavelength_plan(&self) -> Result<Vec<(WavelengthBand, WavelengthBand)>> {
        self.analysis
            .wavelength_plan
            .iter()
            .map(|p| Ok((p.reference.band()?, p.dut.band()?)))
            .collect()
    }
}

fn parse_region(s: &str, what: &str) -> Result<Region> {
    s.parse::<Region>()
        .map_err(|e| Error::Config(format!("{what} region {s:?}: {e}")))
}

/// Parse `"a:b:step"` into `a, a + step, ...` strictly below `b`.
pub fn parse_threshold_range(s: &str) -> Result<Vec<i32>> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let [a, b, step] = parts[..] else {
        return Err(Error::Parse(format!("threshold range {s:?} is not a:b:step")));
    };
    let num = |t: &str| {
        t.parse::<i32>()
            .map_err(|_| Error::Parse(format!("threshold range {s:?}: {t:?} is not an integer")))
    };
    let (a, b, step) = (num(a)?, num(b)?, num(step)?);
    if step <= 0 {
        return Err(Error::Parse(format!("threshold range {s:?}: step must be > 0")));
    }
    if a >= b {
        return Err(Error::Parse(format!("threshold range {s:?} is empty")));
    }
    Ok((a..b).step_by(step as usize).collect())
}

/// A single threshold `"s"` or a range `"a:b:step"`.
pub fn parse_thresholds(s: &str) -> Result<Vec<i32>> {
    if s.contains(':') {
        parse_threshold_range(s)
    } else {
        s.trim()
            .parse::<i32>()
            .map(|t| vec![t])
            .map_err(|_| Error::Parse(format!("threshold {s:?} is neither an integer nor a:b:step")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_desk_scale_sim() {
        let mut sim = RunConfig::parse("").unwrap().sim_config().unwrap();
        let mut expect = SimConfig::desk_scale(0);
        for f in sim.filters.iter_mut().chain(expect.filters.iter_mut()) {
            f.region = f.region.clone().with_label("filter");
        }
        assert_eq!(sim, expect);
    }

    #[test]
    fn echo_round_trips() {
        let mut c = RunConfig::default();
        c.analysis.seed = 99;
        c.noise.dark_event_rate = 3e-3;
        let back = RunConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse("[source]\npair_rat = 3.0\n").is_err());
        assert!(RunConfig::parse("[sourc]\n").is_err());
        assert!(RunConfig::parse("[analysis]\nthresholds = \"9:3:1\"\n").is_err());
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let c = RunConfig::parse("[noise]\ndark_event_rate = 0.01\n").unwrap();
        assert_eq!(c.noise.dark_event_rate, 0.01);
        assert_eq!(c.noise.stray_light_rate, NoiseSection::default().stray_light_rate);
    }

    #[test]
    fn threshold_ranges() {
        assert_eq!(parse_threshold_range("45:120:5").unwrap().len(), 15);
        assert_eq!(parse_threshold_range("45:125:5").unwrap().len(), 16);
        assert_eq!(parse_threshold_range("0:1:5").unwrap(), vec![0]);
        for bad in ["5:5:1", "10:5:1", "1:5:0", "1:5", "a:5:1"] {
            assert!(parse_threshold_range(bad).is_err(), "{bad}");
        }
        assert_eq!(parse_thresholds("80").unwrap(), vec![80]);
    }
}
