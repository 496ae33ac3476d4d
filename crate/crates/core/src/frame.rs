//! Raw and thresholded camera frames.

use crate::error::{Error, Result};
use crate::geometry::{CameraGeometry, Region};

/// Maximum value of a 16-bit digitized pixel.
pub const ADU_MAX: u16 = u16::MAX;

/// One gate of digitized pixel values (ADU), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame {
    pub geometry: CameraGeometry,
    pub values: Vec<u16>,
    pub frame_index: u64,
}

impl RawFrame {
    pub fn new(geometry: CameraGeometry, values: Vec<u16>, frame_index: u64) -> Result<Self> {
        if values.len() != geometry.pixel_count() {
            return Err(Error::Geometry(format!(
                "frame has {} values for a {}x{} geometry",
                values.len(),
                geometry.width(),
                geometry.height()
            )));
        }
        Ok(RawFrame {
            geometry,
            values,
            frame_index,
        })
    }

    pub fn filled(geometry: CameraGeometry, value: u16, frame_index: u64) -> Self {
        let n = geometry.pixel_count();
        RawFrame {
            geometry,
            values: vec![value; n],
            frame_index,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.values[self.geometry.index(x, y)]
    }

    pub fn total(&self) -> u64 {
        self.values.iter().map(|&v| v as u64).sum()
    }
}

/// Per-pixel click map of one gate.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryFrame {
    pub geometry: CameraGeometry,
    pub clicks: Vec<bool>,
    pub frame_index: u64,
    pub threshold_used: i32,
}

impl BinaryFrame {
    pub fn new(geometry: CameraGeometry, clicks: Vec<bool>, frame_index: u64, threshold_used: i32) -> Result<Self> {
        if clicks.len() != geometry.pixel_count() {
            return Err(Error::Geometry(format!(
                "click map has {} entries for a {}x{} geometry",
                clicks.len(),
                geometry.width(),
                geometry.height()
            )));
        }
        Ok(BinaryFrame {
            geometry,
            clicks,
            frame_index,
            threshold_used,
        })
    }

    #[inline]
    pub fn click(&self, x: usize, y: usize) -> bool {
        self.clicks[self.geometry.index(x, y)]
    }

    /// Number of clicking pixels inside the region.
    pub fn clicks_in(&self, region: &Region) -> usize {
        region.indices(&self.geometry).filter(|&i| self.clicks[i]).count()
    }

    /// Region-as-one-detector indicator: true when any pixel of the region clicks.
    pub fn any_in(&self, region: &Region) -> bool {
        region.indices(&self.geometry).any(|i| self.clicks[i])
    }
}

/// Sum `factor × factor` blocks into super-pixels, saturating at [`ADU_MAX`].
pub fn bin_pixels(frame: &RawFrame, factor: usize) -> Result<RawFrame> {
    let geometry = frame.geometry.binned(factor)?;
    let (w, h) = (geometry.width(), geometry.height());
    let src_w = frame.geometry.width();
    let mut values = vec![0u16; w * h];
    for (oy, row) in values.chunks_mut(w).enumerate() {
        for (ox, out) in row.iter_mut().enumerate() {
            let mut sum = 0u64;
            for dy in 0..factor {
                let start = (oy * factor + dy) * src_w + ox * factor;
                sum += frame.values[start..start + factor].iter().map(|&v| v as u64).sum::<u64>();
            }
            *out = sum.min(ADU_MAX as u64) as u16;
        }
    }
    RawFrame::new(geometry, values, frame.frame_index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geometry(w: usize, h: usize) -> CameraGeometry {
        CameraGeometry::new(w, h, 1, (w as f64 / 2.0, h as f64 / 2.0)).unwrap()
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(RawFrame::new(geometry(4, 4), vec![0; 15], 0).is_err());
        assert!(BinaryFrame::new(geometry(4, 4), vec![false; 17], 0, 0).is_err());
    }

    #[test]
    fn identity_binning() {
        let f = RawFrame::new(geometry(4, 2), (0..8).collect(), 3).unwrap();
        let b = bin_pixels(&f, 1).unwrap();
        assert_eq!(b, f);
    }

    #[test]
    fn block_sum() {
        let f = RawFrame::filled(geometry(2, 2), 5, 0);
        let b = bin_pixels(&f, 2).unwrap();
        assert_eq!(b.values, vec![20]);
        assert_eq!((b.geometry.width(), b.geometry.height(), b.geometry.binning()), (1, 1, 2));
    }

    #[test]
    fn saturates() {
        let mut f = RawFrame::filled(geometry(16, 8), 0, 0);
        f.values[3] = ADU_MAX;
        f.values[4] = 10;
        let b = bin_pixels(&f, 8).unwrap();
        assert_eq!(b.values, vec![ADU_MAX, 0]);
    }

    #[test]
    fn non_dividing_factor() {
        let f = RawFrame::filled(geometry(6, 4), 1, 0);
        assert!(bin_pixels(&f, 4).is_err());
        assert!(bin_pixels(&f, 0).is_err());
    }

    #[test]
    fn region_queries() {
        let g = geometry(4, 4);
        let mut clicks = vec![false; 16];
        clicks[g.index(1, 1)] = true;
        clicks[g.index(2, 1)] = true;
        let f = BinaryFrame::new(g, clicks, 0, 10).unwrap();
        let r = Region::new(1, 1, 2, 2, "r").unwrap();
        assert_eq!(f.clicks_in(&r), 2);
        assert!(f.any_in(&r));
        assert!(!f.any_in(&Region::new(0, 2, 4, 2, "r").unwrap()));
    }

    proptest! {
        #[test]
        fn binning_conserves_counts(values in proptest::collection::vec(0u16..1000, 64), factor in prop::sample::select(vec![1usize, 2, 4, 8])) {
            let f = RawFrame::new(geometry(8, 8), values, 0).unwrap();
            let b = bin_pixels(&f, factor).unwrap();
            prop_assert_eq!(b.total(), f.total());
        }
    }
}
