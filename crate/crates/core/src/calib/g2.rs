//! Normalized second-order correlation between a reference region and every pixel.

use std::borrow::Borrow;

use crate::error::{Error, Result};
use crate::frame::{BinaryFrame, RawFrame};
use crate::geometry::{CameraGeometry, Region};
use crate::threshold::{peak_clicks, BaselineMap};

/// `g2(p) = ⟨c_ref c_p⟩ / (⟨c_ref⟩⟨c_p⟩)` over frames, with `c_ref` the
/// region-OR indicator of the reference and `c_p` the click of pixel `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMap {
    pub geometry: CameraGeometry,
    /// NaN where undefined (no clicks at the pixel or in the reference).
    pub g2: Vec<f64>,
    /// Delta-method standard error of each `g2` value, NaN where undefined.
    pub sigma: Vec<f64>,
    pub ref_region: Region,
    pub threshold: i32,
    pub n_frames: u64,
    pub ref_clicks: u64,
    pub pixel_clicks: Vec<u64>,
    pub joint_clicks: Vec<u64>,
}

impl CorrelationMap {
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let v = self.g2[self.geometry.index(x, y)];
        (!v.is_nan()).then_some(v)
    }

    pub fn is_defined(&self, i: usize) -> bool {
        !self.g2[i].is_nan()
    }

    /// `(g2 − 1) / sigma`, NaN where undefined.
    pub fn z_score(&self, i: usize) -> f64 {
        (self.g2[i] - 1.0) / self.sigma[i]
    }

    /// Poisson probability of at least the observed joint count if the pixel
    /// were independent of the reference.
    pub fn joint_tail_probability(&self, i: usize) -> f64 {
        let mu = self.ref_clicks as f64 * self.pixel_clicks[i] as f64 / self.n_frames as f64;
        poisson_upper_tail(self.joint_clicks[i], mu)
    }
}

/// `P(X >= k)` for `X ~ Poisson(mu)`, summed directly over the tail.
fn poisson_upper_tail(k: u64, mu: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if mu <= 0.0 {
        return 0.0;
    }
    if (k as f64) <= mu {
        return 1.0;
    }
    let kf = k as f64;
    let mut term = (kf * mu.ln() - mu - libm::lgamma(kf + 1.0)).exp();
    let mut sum = 0.0;
    let mut j = kf;
    while term > sum * 1e-15 && j < kf + 1e6 {
        sum += term;
        j += 1.0;
        term *= mu / j;
    }
    sum.min(1.0)
}

/// Mergeable partial sums behind [`CorrelationMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct G2Accumulator {
    geometry: CameraGeometry,
    ref_region: Region,
    ref_indices: Vec<usize>,
    threshold: i32,
    n_frames: u64,
    ref_clicks: u64,
    pixel: Vec<u64>,
    joint: Vec<u64>,
    scratch: Vec<bool>,
}

impl G2Accumulator {
    pub fn new(geometry: &CameraGeometry, ref_region: &Region, threshold: i32) -> Result<Self> {
        ref_region.check_inside(geometry)?;
        let n = geometry.pixel_count();
        Ok(G2Accumulator {
            geometry: geometry.clone(),
            ref_region: ref_region.clone(),
            ref_indices: ref_region.indices(geometry).collect(),
            threshold,
            n_frames: 0,
            ref_clicks: 0,
            pixel: vec![0; n],
            joint: vec![0; n],
            scratch: Vec::new(),
        })
    }

    fn push_clicks(&mut self, clicks: &[bool]) {
        let r = self.ref_indices.iter().any(|&i| clicks[i]);
        self.n_frames += 1;
        self.ref_clicks += r as u64;
        for (i, &c) in clicks.iter().enumerate() {
            if c {
                self.pixel[i] += 1;
                if r {
                    self.joint[i] += 1;
                }
            }
        }
    }

    pub fn push(&mut self, frame: &BinaryFrame) -> Result<()> {
        if frame.geometry != self.geometry {
            return Err(Error::Geometry("binary frame geometry differs from the g2 map".into()));
        }
        self.push_clicks(&frame.clicks);
        Ok(())
    }

    /// Threshold a raw frame at the accumulator's threshold and add it.
    pub fn push_raw(&mut self, frame: &RawFrame, baseline: &BaselineMap) -> Result<()> {
        if frame.geometry != self.geometry || baseline.geometry != self.geometry {
            return Err(Error::Geometry("raw frame geometry differs from the g2 map".into()));
        }
        let mut scratch = std::mem::take(&mut self.scratch);
        scratch.clear();
        scratch.extend((0..frame.values.len()).map(|i| peak_clicks(baseline.excess_quarters(frame, i), self.threshold)));
        self.push_clicks(&scratch);
        self.scratch = scratch;
        Ok(())
    }

    pub fn merge(mut self, other: &G2Accumulator) -> Self {
        self.n_frames += other.n_frames;
        self.ref_clicks += other.ref_clicks;
        for (a, b) in self.pixel.iter_mut().zip(&other.pixel) {
            *a += b;
        }
        for (a, b) in self.joint.iter_mut().zip(&other.joint) {
            *a += b;
        }
        self
    }

    pub fn finish(self) -> Result<CorrelationMap> {
        if self.n_frames == 0 {
            return Err(Error::Empty("no frames for the g2 map"));
        }
        let n = self.n_frames as f64;
        let r = self.ref_clicks as f64;
        let (g2, sigma) = self
            .pixel
            .iter()
            .zip(&self.joint)
            .map(|(&p, &a)| {
                if p == 0 || self.ref_clicks == 0 {
                    return (f64::NAN, f64::NAN);
                }
                let (p, a) = (p as f64, a as f64);
                let g = n * a / (r * p);
                // var(ln g) = 1/a − 1/R − 1/P + 2a/(RP) − 1/N for multinomial counts.
                let s = if a > 0.0 {
                    let var = 1.0 / a - 1.0 / r - 1.0 / p + 2.0 * a / (r * p) - 1.0 / n;
                    g * var.max(0.0).sqrt()
                } else {
                    // One joint count's worth of g2.
                    n / (r * p)
                };
                (g, s)
            })
            .unzip();
        Ok(CorrelationMap {
            geometry: self.geometry,
            g2,
            sigma,
            ref_region: self.ref_region,
            threshold: self.threshold,
            n_frames: self.n_frames,
            ref_clicks: self.ref_clicks,
            pixel_clicks: self.pixel,
            joint_clicks: self.joint,
        })
    }
}

/// g2 map of a binary frame stream against a reference region.
pub fn g2_map<I>(frames: I, reference: &Region) -> Result<CorrelationMap>
where
    I: IntoIterator,
    I::Item: Borrow<BinaryFrame>,
{
    let mut frames = frames.into_iter();
    let first = frames.next().ok_or(Error::Empty("no frames for the g2 map"))?;
    let first = first.borrow();
    let mut acc = G2Accumulator::new(&first.geometry, reference, first.threshold_used)?;
    acc.push(first)?;
    for f in frames {
        acc.push(f.borrow())?;
    }
    acc.finish()
}

/// Parameters of the conjugate-area search on a g2 map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateSearch {
    /// Minimum g2 of a qualifying pixel.
    pub g2_min: f64,
    /// Pixels added on every side of the bounding box of qualifying pixels.
    pub margin: usize,
    /// Crosstalk halo (pixels) around the reference that is never searched.
    pub halo: usize,
    /// Required significance, in Gaussian sigmas, of each pixel's joint-count
    /// excess after correcting for the number of pixels searched.
    pub min_significance: f64,
}

impl Default for ConjugateSearch {
    fn default() -> Self {
        ConjugateSearch {
            g2_min: 2.0,
            margin: 0,
            halo: 2,
            min_significance: 3.0,
        }
    }
}

/// Smallest rectangle covering every pixel with significantly elevated g2
/// outside the reference halo, grown by `margin` and clipped to the frame.
pub fn find_conjugate_region(map: &CorrelationMap, search: &ConjugateSearch) -> Result<Region> {
    let g = &map.geometry;
    let halo = map.ref_region.dilate(search.halo, g);
    let searched: Vec<(usize, usize)> = (0..g.height())
        .flat_map(|y| (0..g.width()).map(move |x| (x, y)))
        .filter(|&(x, y)| !halo.contains(x, y) && map.is_defined(g.index(x, y)))
        .collect();
    let alpha = 0.5 * libm::erfc(search.min_significance / std::f64::consts::SQRT_2) / searched.len().max(1) as f64;
    let mut bounds: Option<(usize, usize, usize, usize)> = None;
    for &(x, y) in &searched {
        let i = g.index(x, y);
        if map.g2[i] < search.g2_min || !(map.joint_tail_probability(i) <= alpha) {
            continue;
        }
        bounds = Some(match bounds {
            None => (x, y, x, y),
            Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
        });
    }
    let (x0, y0, x1, y1) = bounds.ok_or_else(|| {
        Error::NoQualifyingPixels(format!(
            "no pixel outside the reference halo has g2 >= {} at {} sigma",
            search.g2_min, search.min_significance
        ))
    })?;
    let found = Region::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1, "dut")?.dilate(search.margin, g);
    if found.intersects(&map.ref_region) {
        return Err(Error::RegionOverlap(map.ref_region.to_string(), found.to_string()));
    }
    Ok(found)
}
