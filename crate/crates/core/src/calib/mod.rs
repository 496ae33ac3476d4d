//! Autonomous absolute calibration: one part of the chip heralds photon pairs
//! for another, and the heralding efficiency of the DUT pixels is their
//! quantum efficiency.
//!
//! The estimator is
//!
//! ```text
//! η_DUT = (N_cc − N_acc) / (N_ref − ΔN_n)
//! ```
//!
//! with every term a mean per gate: coincidences, accidental coincidences,
//! reference clicks and reference clicks with the pump rotated off.

mod bootstrap;
mod coincidence;
pub mod experiment;
mod g2;
mod scan;

use crate::error::{Error, Result};
use crate::optics::{OpticalChannel, WavelengthBand};
use crate::threshold::{CurveKind, SweepCurve};

pub use bootstrap::{BlockStats, Calibrator};
pub use experiment::{calibrate_traces, Acquisition};
pub use coincidence::{count_coincidences, estimate_accidentals, ClickTrace, PeakTrace};
pub use g2::{find_conjugate_region, g2_map, ConjugateSearch, CorrelationMap, G2Accumulator};
pub use scan::{
    uniformity_from_traces, uniformity_scan, wavelength_scan, ScanSetup, UniformityEntry, UniformityReference,
    UniformityScan,
};

/// Mean per-gate inputs of the estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceStats {
    pub n_frames: u64,
    pub n_noise_frames: u64,
    /// True plus accidental coincidences.
    pub n_cc: f64,
    /// Accidental coincidences from the shifted-frame estimator.
    pub n_acc: f64,
    pub n_ref: f64,
    /// Reference clicks per gate in the pump-off run.
    pub dn_noise: f64,
    /// DUT singles per gate.
    pub n_dut: f64,
    /// Cross-check of `n_acc` from the singles product `n_ref · n_dut`.
    pub n_acc_product: f64,
}

impl CoincidenceStats {
    /// Collect the estimator inputs from a pump-on trace and a pump-off trace.
    pub fn from_traces(signal: &ClickTrace, noise: &ClickTrace, lag: usize) -> Result<Self> {
        if signal.len() <= lag {
            return Err(Error::Empty("signal run shorter than lag + 1 frames"));
        }
        if noise.is_empty() {
            return Err(Error::Empty("pump-off run has no frames"));
        }
        if lag == 0 {
            return Err(Error::Domain("accidentals need a frame lag >= 1".into()));
        }
        let n = signal.len() as f64;
        let (acc_hits, acc_pairs) = signal.shifted_count(lag);
        let n_ref = signal.ref_count() as f64 / n;
        let n_dut = signal.dut_count() as f64 / n;
        Ok(CoincidenceStats {
            n_frames: signal.len() as u64,
            n_noise_frames: noise.len() as u64,
            n_cc: signal.coincidence_count() as f64 / n,
            n_acc: acc_hits as f64 / acc_pairs as f64,
            n_ref,
            dn_noise: noise.ref_count() as f64 / noise.len() as f64,
            n_dut,
            n_acc_product: n_ref * n_dut,
        })
    }

    /// Coincidence-to-accidental ratio, the region-pair g².
    pub fn cc_to_acc(&self) -> f64 {
        self.n_cc / self.n_acc
    }
}

/// Quantum efficiency estimate at one threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    /// Before the optical-channel correction.
    pub eta_raw: f64,
    /// `eta_raw` divided by the channel transmission.
    pub eta_corrected: f64,
    /// One-sigma uncertainty of `eta_corrected`.
    pub sigma_eta: f64,
    /// First-order propagation of binomial errors, for comparison with `sigma_eta`.
    pub sigma_eta_analytic: f64,
    pub threshold: i32,
    pub lambda_dut: Option<WavelengthBand>,
    pub channel_transmission: f64,
    /// Set when the net coincidence rate is negative (a statistical fluctuation).
    pub low_signal: bool,
    pub inputs: CoincidenceStats,
}

/// Klyshko estimator with first-order error propagation.
///
/// Negative estimates are returned unclamped and flagged `low_signal`.
pub fn klyshko_qe(
    stats: &CoincidenceStats,
    channel: &OpticalChannel,
    threshold: i32,
    lambda_dut: Option<WavelengthBand>,
) -> Result<CalibrationResult> {
    let net_ref = stats.n_ref - stats.dn_noise;
    if !(net_ref > 0.0) {
        return Err(Error::NoNetSignal {
            n_ref: stats.n_ref,
            dn_noise: stats.dn_noise,
        });
    }
    let t = channel.total_transmission();
    let eta_raw = (stats.n_cc - stats.n_acc) / net_ref;
    Ok(CalibrationResult {
        eta_raw,
        eta_corrected: eta_raw / t,
        sigma_eta: analytic_sigma(stats, eta_raw, net_ref) / t,
        sigma_eta_analytic: analytic_sigma(stats, eta_raw, net_ref) / t,
        threshold,
        lambda_dut,
        channel_transmission: t,
        low_signal: eta_raw < 0.0,
        inputs: stats.clone(),
    })
}

fn analytic_sigma(s: &CoincidenceStats, eta: f64, net_ref: f64) -> f64 {
    let n = s.n_frames as f64;
    let nn = s.n_noise_frames as f64;
    let var_cc = s.n_cc * (1.0 - s.n_cc) / n;
    let var_acc = s.n_acc * (1.0 - s.n_acc) / n;
    let var_ref = s.n_ref * (1.0 - s.n_ref) / n;
    let var_noise = s.dn_noise * (1.0 - s.dn_noise) / nn;
    // Coincidences are a subset of reference clicks.
    let cov_cc_ref = s.n_cc * (1.0 - s.n_ref) / n;
    let var = var_cc + var_acc + eta * eta * (var_ref + var_noise) - 2.0 * eta * cov_cc_ref;
    var.max(0.0).sqrt() / net_ref
}

/// Scale a relative QE curve so it equals `anchor_qe` at `anchor_threshold`.
pub fn rescale_relative(curve: &SweepCurve, anchor_threshold: i32, anchor_qe: f64) -> Result<SweepCurve> {
    let at = curve.value_at(anchor_threshold).ok_or_else(|| {
        Error::Domain(format!("anchor threshold {anchor_threshold} is not on the curve"))
    })?;
    if !(at > 0.0) {
        return Err(Error::Statistics(format!(
            "relative curve is {at} at the anchor threshold {anchor_threshold}"
        )));
    }
    let factor = anchor_qe / at;
    let mut values: Vec<f64> = curve.values.iter().map(|v| v * factor).collect();
    let k = curve.thresholds.iter().position(|&t| t == anchor_threshold).expect("anchor located above");
    values[k] = anchor_qe;
    SweepCurve::new(curve.thresholds.clone(), values, CurveKind::QeRelative)
}
