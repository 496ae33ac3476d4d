//! Region-OR coincidence counting between a reference and a DUT pixel group.

use std::borrow::Borrow;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{BinaryFrame, RawFrame};
use crate::geometry::Region;
use crate::sim::Simulator;
use crate::threshold::{peak_clicks, BaselineMap};

/// Per-frame on-off indicators of the reference and DUT detectors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClickTrace {
    pub reference: Vec<bool>,
    pub dut: Vec<bool>,
}

impl ClickTrace {
    pub fn new(reference: Vec<bool>, dut: Vec<bool>) -> Result<Self> {
        if reference.len() != dut.len() {
            return Err(Error::Domain("reference and DUT traces differ in length".into()));
        }
        Ok(ClickTrace { reference, dut })
    }

    /// Region-OR indicators of two disjoint regions over a binary frame stream.
    pub fn from_binary<I>(frames: I, reference: &Region, dut: &Region) -> Result<Self>
    where
        I: IntoIterator,
        I::Item: Borrow<BinaryFrame>,
    {
        check_disjoint(reference, dut)?;
        let mut trace = ClickTrace::default();
        for f in frames {
            let f = f.borrow();
            reference.check_inside(&f.geometry)?;
            dut.check_inside(&f.geometry)?;
            trace.reference.push(f.any_in(reference));
            trace.dut.push(f.any_in(dut));
        }
        Ok(trace)
    }

    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }

    pub fn ref_count(&self) -> u64 {
        self.reference.iter().filter(|&&c| c).count() as u64
    }

    pub fn dut_count(&self) -> u64 {
        self.dut.iter().filter(|&&c| c).count() as u64
    }

    /// Frames where both detectors click.
    pub fn coincidence_count(&self) -> u64 {
        self.reference.iter().zip(&self.dut).filter(|(&r, &d)| r && d).count() as u64
    }

    /// Reference clicks on frame `k` paired with DUT clicks on frame `k + lag`,
    /// and the number of such frame pairs.
    pub fn shifted_count(&self, lag: usize) -> (u64, u64) {
        let n = self.len().saturating_sub(lag);
        let hits = self.reference[..n]
            .iter()
            .zip(&self.dut[lag..])
            .filter(|(&r, &d)| r && d)
            .count() as u64;
        (hits, n as u64)
    }
}

pub(crate) fn check_disjoint(reference: &Region, dut: &Region) -> Result<()> {
    if reference.intersects(dut) {
        Err(Error::RegionOverlap(reference.to_string(), dut.to_string()))
    } else {
        Ok(())
    }
}

/// Mean coincidences per frame and mean reference clicks per frame. A coincidence
/// is a frame where both regions click anywhere; the gate is the coincidence window.
pub fn count_coincidences<I>(frames: I, reference: &Region, dut: &Region) -> Result<(f64, f64)>
where
    I: IntoIterator,
    I::Item: Borrow<BinaryFrame>,
{
    let t = ClickTrace::from_binary(frames, reference, dut)?;
    if t.is_empty() {
        return Err(Error::Empty("no frames for coincidence counting"));
    }
    let n = t.len() as f64;
    Ok((t.coincidence_count() as f64 / n, t.ref_count() as f64 / n))
}

/// Accidental-coincidence floor from reference clicks on frame `k` and DUT
/// clicks on frame `k + lag`, which carry no pair correlation.
pub fn estimate_accidentals<I>(frames: I, reference: &Region, dut: &Region, lag: usize) -> Result<f64>
where
    I: IntoIterator,
    I::Item: Borrow<BinaryFrame>,
{
    if lag == 0 {
        return Err(Error::Domain("accidentals need a frame lag >= 1".into()));
    }
    let t = ClickTrace::from_binary(frames, reference, dut)?;
    if t.len() <= lag {
        return Err(Error::Empty("stream shorter than lag + 1 frames"));
    }
    let (hits, pairs) = t.shifted_count(lag);
    Ok(hits as f64 / pairs as f64)
}

/// Per-frame peak excess (quarter ADU) of several regions, from which region-OR
/// clicks at any threshold follow without revisiting the frames.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakTrace {
    regions: Vec<Region>,
    peaks: Vec<i32>,
}

impl PeakTrace {
    pub fn collect<I>(frames: I, baseline: &BaselineMap, regions: &[Region]) -> Result<Self>
    where
        I: IntoIterator,
        I::Item: Borrow<RawFrame>,
    {
        for r in regions {
            r.check_inside(&baseline.geometry)?;
        }
        let mut peaks = Vec::new();
        for f in frames {
            let f = f.borrow();
            if f.geometry != baseline.geometry {
                return Err(Error::Geometry("frame geometry does not match the baseline map".into()));
            }
            peaks.extend(regions.iter().map(|r| baseline.region_peak(f, r)));
        }
        Ok(PeakTrace {
            regions: regions.to_vec(),
            peaks,
        })
    }

    /// Simulate frames `start..start + n` in parallel and keep only the peaks.
    pub fn simulate(sim: &Simulator, start: u64, n: u64, baseline: &BaselineMap, regions: &[Region]) -> Result<Self> {
        for r in regions {
            r.check_inside(&baseline.geometry)?;
        }
        let per_frame: Vec<Vec<i32>> = (start..start + n)
            .into_par_iter()
            .map(|i| {
                let f = sim.frame(i);
                regions.iter().map(|r| baseline.region_peak(&f, r)).collect()
            })
            .collect();
        Ok(PeakTrace {
            regions: regions.to_vec(),
            peaks: per_frame.into_iter().flatten().collect(),
        })
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn n_frames(&self) -> usize {
        if self.regions.is_empty() {
            0
        } else {
            self.peaks.len() / self.regions.len()
        }
    }

    /// Region-OR indicator of region `k` at threshold `s_th` for every frame.
    pub fn clicks(&self, k: usize, s_th: i32) -> Vec<bool> {
        let m = self.regions.len();
        self.peaks.iter().skip(k).step_by(m).map(|&p| peak_clicks(p, s_th)).collect()
    }

    /// Reference/DUT trace for the region pair `(reference, dut)`.
    pub fn trace(&self, reference: usize, dut: usize, s_th: i32) -> Result<ClickTrace> {
        check_disjoint(&self.regions[reference], &self.regions[dut])?;
        ClickTrace::new(self.clicks(reference, s_th), self.clicks(dut, s_th))
    }
}
