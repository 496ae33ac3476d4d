//! Baseline estimation, threshold binarization and click-count reductions.
//!
//! Baselines are kept in quarter-ADU fixed point, so a pixel clicks at
//! threshold `s` iff `4·value − round(4·baseline) > 4·s`. Every comparison is
//! exact integer arithmetic and every reduction is an integer sum, which makes
//! partial results mergeable in any order.

use std::borrow::Borrow;

use crate::error::{Error, Result};
use crate::frame::{BinaryFrame, RawFrame};
use crate::geometry::{CameraGeometry, Region};

/// Per-pixel static background level.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineMap {
    pub geometry: CameraGeometry,
    pub baseline: Vec<f64>,
    pub frames_used: u64,
    quarters: Vec<i32>,
}

impl BaselineMap {
    pub fn new(geometry: CameraGeometry, baseline: Vec<f64>, frames_used: u64) -> Result<Self> {
        if baseline.len() != geometry.pixel_count() {
            return Err(Error::Geometry("baseline map size does not match geometry".into()));
        }
        if frames_used == 0 {
            return Err(Error::Empty("baseline needs at least one frame"));
        }
        if let Some(b) = baseline.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
            return Err(Error::Domain(format!("baseline value {b} is not finite and >= 0")));
        }
        let quarters = baseline.iter().map(|b| (4.0 * b).round() as i32).collect();
        Ok(BaselineMap {
            geometry,
            baseline,
            frames_used,
            quarters,
        })
    }

    /// Baseline-subtracted value of pixel `i` in quarter ADU.
    #[inline]
    pub fn excess_quarters(&self, frame: &RawFrame, i: usize) -> i32 {
        4 * frame.values[i] as i32 - self.quarters[i]
    }

    fn check(&self, geometry: &CameraGeometry) -> Result<()> {
        if &self.geometry == geometry {
            Ok(())
        } else {
            Err(Error::Geometry("frame geometry does not match the baseline map".into()))
        }
    }

    /// Largest baseline-subtracted value inside `region` (quarter ADU). The region,
    /// read as one on-off detector, clicks at threshold `s` iff [`peak_clicks`] holds.
    pub fn region_peak(&self, frame: &RawFrame, region: &Region) -> i32 {
        region
            .indices(&frame.geometry)
            .map(|i| self.excess_quarters(frame, i))
            .max()
            .unwrap_or(i32::MIN)
    }
}

/// Whether a quarter-ADU excess clicks at threshold `s_th` (strictly above).
#[inline]
pub fn peak_clicks(peak_quarters: i32, s_th: i32) -> bool {
    peak_quarters as i64 > 4 * s_th as i64
}

/// Per-pixel arithmetic mean over frames taken without illumination.
pub fn estimate_baseline<I>(dark_frames: I) -> Result<BaselineMap>
where
    I: IntoIterator,
    I::Item: Borrow<RawFrame>,
{
    let mut iter = dark_frames.into_iter();
    let first = iter.next().ok_or(Error::Empty("no dark frames for the baseline"))?;
    let first = first.borrow();
    let geometry = first.geometry.clone();
    let mut sums: Vec<u64> = first.values.iter().map(|&v| v as u64).collect();
    let mut n = 1u64;
    for f in iter {
        let f = f.borrow();
        if f.geometry != geometry {
            return Err(Error::Geometry("dark frames differ in geometry".into()));
        }
        for (s, &v) in sums.iter_mut().zip(&f.values) {
            *s += v as u64;
        }
        n += 1;
    }
    let baseline = sums.into_iter().map(|s| s as f64 / n as f64).collect();
    BaselineMap::new(geometry, baseline, n)
}

/// Click where the baseline-subtracted value strictly exceeds `s_th`.
pub fn binarize(frame: &RawFrame, baseline: &BaselineMap, s_th: i32) -> Result<BinaryFrame> {
    baseline.check(&frame.geometry)?;
    let clicks = (0..frame.values.len())
        .map(|i| peak_clicks(baseline.excess_quarters(frame, i), s_th))
        .collect();
    BinaryFrame::new(frame.geometry.clone(), clicks, frame.frame_index, s_th)
}

/// Click totals of one region over a frame stream.
#[derive(Debug, Clone, PartialEq)]
pub struct CountStats {
    pub region: Region,
    pub n_frames: u64,
    /// Sum over frames of the number of clicking pixels.
    pub clicks_total: u64,
    /// Number of frames in which at least one pixel of the region clicked.
    pub region_or_total: u64,
    pub mean_clicks_per_frame: f64,
    pub mean_clicks_per_pixel_per_frame: f64,
    pub region_or_rate: f64,
}

/// Mergeable partial sums behind [`CountStats`].
#[derive(Debug, Clone, PartialEq)]
pub struct CountAccumulator {
    region: Region,
    n_frames: u64,
    clicks_total: u64,
    region_or_total: u64,
}

impl CountAccumulator {
    pub fn new(region: Region) -> Self {
        CountAccumulator {
            region,
            n_frames: 0,
            clicks_total: 0,
            region_or_total: 0,
        }
    }

    pub fn push(&mut self, frame: &BinaryFrame) {
        let k = frame.clicks_in(&self.region) as u64;
        self.n_frames += 1;
        self.clicks_total += k;
        self.region_or_total += (k > 0) as u64;
    }

    pub fn merge(mut self, other: &CountAccumulator) -> Self {
        self.n_frames += other.n_frames;
        self.clicks_total += other.clicks_total;
        self.region_or_total += other.region_or_total;
        self
    }

    pub fn finish(self) -> Result<CountStats> {
        if self.n_frames == 0 {
            return Err(Error::Empty("no frames to count"));
        }
        let n = self.n_frames as f64;
        let px = self.region.pixel_count() as f64;
        Ok(CountStats {
            mean_clicks_per_frame: self.clicks_total as f64 / n,
            mean_clicks_per_pixel_per_frame: self.clicks_total as f64 / (n * px),
            region_or_rate: self.region_or_total as f64 / n,
            region: self.region,
            n_frames: self.n_frames,
            clicks_total: self.clicks_total,
            region_or_total: self.region_or_total,
        })
    }
}

pub fn accumulate_counts<I>(frames: I, region: &Region) -> Result<CountStats>
where
    I: IntoIterator,
    I::Item: Borrow<BinaryFrame>,
{
    let mut acc = CountAccumulator::new(region.clone());
    for f in frames {
        let f = f.borrow();
        region.check_inside(&f.geometry)?;
        acc.push(f);
    }
    acc.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Signal,
    Noise,
    Snr,
    QeRelative,
    QeAbsolute,
}

/// A quantity sampled at ascending integer thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub thresholds: Vec<i32>,
    pub values: Vec<f64>,
    pub kind: CurveKind,
}

impl SweepCurve {
    pub fn new(thresholds: Vec<i32>, values: Vec<f64>, kind: CurveKind) -> Result<Self> {
        check_thresholds(&thresholds)?;
        if thresholds.len() != values.len() {
            return Err(Error::Domain("sweep thresholds and values differ in length".into()));
        }
        Ok(SweepCurve {
            thresholds,
            values,
            kind,
        })
    }

    pub fn value_at(&self, s_th: i32) -> Option<f64> {
        self.thresholds.iter().position(|&t| t == s_th).map(|i| self.values[i])
    }
}

pub(crate) fn check_thresholds(thresholds: &[i32]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::Empty("threshold list"));
    }
    if thresholds.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("thresholds must be strictly ascending".into()));
    }
    Ok(())
}

/// Per-pixel click counts at many thresholds in one pass over raw frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAccumulator {
    thresholds: Vec<i32>,
    /// `hist[j]` counts pixel-gates whose excess clicks at exactly the first `j` thresholds.
    hist: Vec<u64>,
    n_frames: u64,
    n_pixels: u64,
}

impl SweepAccumulator {
    pub fn new(thresholds: &[i32]) -> Result<Self> {
        check_thresholds(thresholds)?;
        Ok(SweepAccumulator {
            thresholds: thresholds.to_vec(),
            hist: vec![0; thresholds.len() + 1],
            n_frames: 0,
            n_pixels: 0,
        })
    }

    pub fn push(&mut self, frame: &RawFrame, baseline: &BaselineMap, region: &Region) -> Result<()> {
        baseline.check(&frame.geometry)?;
        for i in region.indices(&frame.geometry) {
            let d = baseline.excess_quarters(frame, i) as i64;
            let j = self.thresholds.partition_point(|&s| (4 * s as i64) < d);
            self.hist[j] += 1;
        }
        self.n_frames += 1;
        self.n_pixels = region.pixel_count() as u64;
        Ok(())
    }

    pub fn merge(mut self, other: &SweepAccumulator) -> Self {
        for (a, b) in self.hist.iter_mut().zip(&other.hist) {
            *a += b;
        }
        self.n_frames += other.n_frames;
        self.n_pixels = self.n_pixels.max(other.n_pixels);
        self
    }

    pub fn n_frames(&self) -> u64 {
        self.n_frames
    }

    /// Total pixel clicks at each threshold.
    pub fn clicks(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.thresholds.len()];
        let mut above = 0u64;
        for k in (0..self.thresholds.len()).rev() {
            above += self.hist[k + 1];
            out[k] = above;
        }
        out
    }

    /// Mean clicks per pixel per frame at each threshold.
    pub fn rates(&self) -> Result<Vec<f64>> {
        if self.n_frames == 0 {
            return Err(Error::Empty("no frames in threshold sweep"));
        }
        let denom = (self.n_frames * self.n_pixels) as f64;
        Ok(self.clicks().into_iter().map(|c| c as f64 / denom).collect())
    }
}

fn sweep_rates<I>(frames: I, baseline: &BaselineMap, region: &Region, thresholds: &[i32]) -> Result<Vec<f64>>
where
    I: IntoIterator,
    I::Item: Borrow<RawFrame>,
{
    region.check_inside(&baseline.geometry)?;
    let mut acc = SweepAccumulator::new(thresholds)?;
    for f in frames {
        acc.push(f.borrow(), baseline, region)?;
    }
    acc.rates()
}

/// Signal, noise and signal-to-noise curves of a region.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrSweep {
    pub signal: SweepCurve,
    pub noise: SweepCurve,
    pub snr: SweepCurve,
}

impl SnrSweep {
    /// Build from per-pixel click rates of the pump-on and pump-off streams.
    /// A zero noise rate gives an infinite SNR.
    pub fn from_rates(thresholds: &[i32], signal: Vec<f64>, noise: Vec<f64>) -> Result<Self> {
        let snr = signal
            .iter()
            .zip(&noise)
            .map(|(&s, &n)| if n > 0.0 { s / n } else { f64::INFINITY })
            .collect();
        Ok(SnrSweep {
            signal: SweepCurve::new(thresholds.to_vec(), signal, CurveKind::Signal)?,
            noise: SweepCurve::new(thresholds.to_vec(), noise, CurveKind::Noise)?,
            snr: SweepCurve::new(thresholds.to_vec(), snr, CurveKind::Snr)?,
        })
    }

    /// Pump-on minus pump-off rate, not yet normalized.
    pub fn relative_qe(&self) -> SweepCurve {
        SweepCurve {
            thresholds: self.signal.thresholds.clone(),
            values: self
                .signal
                .values
                .iter()
                .zip(&self.noise.values)
                .map(|(s, n)| s - n)
                .collect(),
            kind: CurveKind::QeRelative,
        }
    }
}

/// Mean clicks per pixel per frame for pump-on and pump-off streams, and their ratio.
pub fn snr_sweep<S, N>(
    signal_frames: S,
    noise_frames: N,
    baseline: &BaselineMap,
    region: &Region,
    thresholds: &[i32],
) -> Result<SnrSweep>
where
    S: IntoIterator,
    S::Item: Borrow<RawFrame>,
    N: IntoIterator,
    N::Item: Borrow<RawFrame>,
{
    let signal = sweep_rates(signal_frames, baseline, region, thresholds)?;
    let noise = sweep_rates(noise_frames, baseline, region, thresholds)?;
    SnrSweep::from_rates(thresholds, signal, noise)
}

/// Noise-subtracted per-pixel click rate versus threshold (unnormalized relative QE).
pub fn relative_qe_curve<S, N>(
    signal_frames: S,
    noise_frames: N,
    baseline: &BaselineMap,
    region: &Region,
    thresholds: &[i32],
) -> Result<SweepCurve>
where
    S: IntoIterator,
    S::Item: Borrow<RawFrame>,
    N: IntoIterator,
    N::Item: Borrow<RawFrame>,
{
    Ok(snr_sweep(signal_frames, noise_frames, baseline, region, thresholds)?.relative_qe())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn g(n: usize) -> CameraGeometry {
        CameraGeometry::centered(n).unwrap()
    }

    #[test]
    fn constant_and_mean_baselines() {
        let frames = vec![RawFrame::filled(g(4), 625, 0); 3];
        let b = estimate_baseline(&frames).unwrap();
        assert!(b.baseline.iter().all(|&v| v == 625.0));
        assert_eq!(b.frames_used, 3);
        let two = [RawFrame::filled(g(4), 600, 0), RawFrame::filled(g(4), 650, 1)];
        let b = estimate_baseline(two.iter()).unwrap();
        assert!(b.baseline.iter().all(|&v| v == 625.0));
        assert!(estimate_baseline(Vec::<RawFrame>::new()).is_err());
    }

    #[test]
    fn strict_threshold_tie_rule() {
        let b = BaselineMap::new(g(2), vec![600.0; 4], 1).unwrap();
        let f = RawFrame::new(g(2), vec![681, 680, 600, 0], 0).unwrap();
        let c = binarize(&f, &b, 80).unwrap();
        assert_eq!(c.clicks, vec![true, false, false, false]);
        assert_eq!(c.threshold_used, 80);
        let all = binarize(&f, &b, -601).unwrap();
        assert!(all.clicks.iter().all(|&c| c));
    }

    #[test]
    fn geometry_mismatch() {
        let b = BaselineMap::new(g(2), vec![600.0; 4], 1).unwrap();
        assert!(binarize(&RawFrame::filled(g(4), 0, 0), &b, 0).is_err());
        assert!(BaselineMap::new(g(2), vec![600.0; 3], 1).is_err());
        assert!(BaselineMap::new(g(2), vec![f64::NAN; 4], 1).is_err());
    }

    #[test]
    fn counts() {
        let geo = g(4);
        let r = Region::new(0, 0, 2, 2, "r").unwrap();
        let zeros = vec![BinaryFrame::new(geo.clone(), vec![false; 16], 0, 0).unwrap(); 5];
        let s = accumulate_counts(&zeros, &r).unwrap();
        assert_eq!((s.clicks_total, s.region_or_total, s.mean_clicks_per_frame), (0, 0, 0.0));

        let mut clicks = vec![false; 16];
        clicks[geo.index(0, 0)] = true;
        clicks[geo.index(1, 1)] = true;
        let one = BinaryFrame::new(geo, clicks, 0, 0).unwrap();
        let s = accumulate_counts([&one], &r).unwrap();
        assert_eq!(s.mean_clicks_per_pixel_per_frame, 0.5);
        assert_eq!(s.region_or_total, 1);
        assert!(accumulate_counts(Vec::<BinaryFrame>::new(), &r).is_err());
    }

    #[test]
    fn region_or_binomial_oracle() {
        // 1 - (1 - p)^4 for independent pixels.
        let geo = g(2);
        let r = geo.full_region("all");
        let p = 0.01;
        let n = 100_000u64;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut acc = CountAccumulator::new(r);
        for i in 0..n {
            let clicks = (0..4).map(|_| rng.random::<f64>() < p).collect();
            acc.push(&BinaryFrame::new(geo.clone(), clicks, i, 0).unwrap());
        }
        let s = acc.finish().unwrap();
        let expect = 1.0 - (1.0 - p).powi(4);
        assert!((expect - 0.0394).abs() < 1e-4);
        let sigma = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!((s.region_or_rate - expect).abs() < 3.0 * sigma, "{} vs {expect}", s.region_or_rate);
    }

    #[test]
    fn identical_streams() {
        let geo = g(4);
        let base = BaselineMap::new(geo.clone(), vec![600.0; 16], 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let frames: Vec<RawFrame> = (0..200)
            .map(|i| RawFrame::new(geo.clone(), (0..16).map(|_| rng.random_range(590..700)).collect(), i).unwrap())
            .collect();
        let r = geo.full_region("all");
        let th = [0, 10, 20, 40, 80];
        let sw = snr_sweep(&frames, &frames, &base, &r, &th).unwrap();
        assert!(sw.snr.values.iter().all(|&v| v == 1.0));
        let rel = relative_qe_curve(&frames, &frames, &base, &r, &th).unwrap();
        assert!(rel.values.iter().all(|&v| v == 0.0));
        assert!(sw.signal.values.windows(2).all(|w| w[1] <= w[0]));
        assert!(snr_sweep(&frames, &frames, &base, &r, &[]).is_err());
        assert!(snr_sweep(&frames, &frames, &base, &r, &[5, 5]).is_err());
    }

    #[test]
    fn zero_noise_gives_infinite_snr() {
        let s = SnrSweep::from_rates(&[1, 2], vec![0.1, 0.05], vec![0.0, 0.01]).unwrap();
        assert!(s.snr.values[0].is_infinite());
        assert!((s.snr.values[1] - 5.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn clicks_are_nested_in_threshold(values in proptest::collection::vec(550u16..800, 16), s1 in -20i32..150, ds in 1i32..100) {
            let geo = g(4);
            let base = BaselineMap::new(geo.clone(), (0..16).map(|i| 600.0 + i as f64 * 0.3).collect(), 1).unwrap();
            let f = RawFrame::new(geo.clone(), values, 0).unwrap();
            let lo = binarize(&f, &base, s1).unwrap();
            let hi = binarize(&f, &base, s1 + ds).unwrap();
            prop_assert!(lo.clicks.iter().zip(&hi.clicks).all(|(&a, &b)| a || !b));
            let mut acc = SweepAccumulator::new(&[s1, s1 + ds]).unwrap();
            acc.push(&f, &base, &geo.full_region("all")).unwrap();
            let c = acc.clicks();
            prop_assert_eq!(c[0], lo.clicks.iter().filter(|&&c| c).count() as u64);
            prop_assert_eq!(c[1], hi.clicks.iter().filter(|&&c| c).count() as u64);
        }

        #[test]
        fn region_peak_matches_or(values in proptest::collection::vec(550u16..800, 16), s in -10i32..200) {
            let geo = g(4);
            let base = BaselineMap::new(geo.clone(), vec![612.25; 16], 1).unwrap();
            let f = RawFrame::new(geo.clone(), values, 0).unwrap();
            let r = Region::new(1, 0, 2, 3, "r").unwrap();
            let bin = binarize(&f, &base, s).unwrap();
            prop_assert_eq!(peak_clicks(base.region_peak(&f, &r), s), bin.any_in(&r));
        }
    }
}
