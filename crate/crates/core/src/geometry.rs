//! Camera geometry and rectangular pixel regions.
//!
//! Pixel coordinates are zero-based and row-major, x to the right and y
//! downward. Pixel `(x, y)` covers the cell `[x, x+1) × [y, y+1)` of the
//! continuous physics plane, so its center sits at `(x + 0.5, y + 0.5)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Super-pixel grid of the camera after hardware binning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeometryRepr", into = "GeometryRepr")]
pub struct CameraGeometry {
    width: usize,
    height: usize,
    binning: u32,
    beam_center: (f64, f64),
}

#[derive(Serialize, Deserialize)]
struct GeometryRepr {
    width: usize,
    height: usize,
    binning: u32,
    beam_center: (f64, f64),
}

impl TryFrom<GeometryRepr> for CameraGeometry {
    type Error = Error;

    fn try_from(r: GeometryRepr) -> Result<Self> {
        CameraGeometry::new(r.width, r.height, r.binning, r.beam_center)
    }
}

impl From<CameraGeometry> for GeometryRepr {
    fn from(g: CameraGeometry) -> Self {
        GeometryRepr {
            width: g.width,
            height: g.height,
            binning: g.binning,
            beam_center: g.beam_center,
        }
    }
}

impl CameraGeometry {
    pub fn new(width: usize, height: usize, binning: u32, beam_center: (f64, f64)) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Geometry(format!("frame must be non-empty, got {width}x{height}")));
        }
        if binning == 0 {
            return Err(Error::Geometry("binning must be >= 1".into()));
        }
        let (bx, by) = beam_center;
        if !(bx.is_finite() && by.is_finite())
            || bx < 0.0
            || by < 0.0
            || bx > width as f64
            || by > height as f64
        {
            return Err(Error::Geometry(format!(
                "beam center ({bx}, {by}) outside the {width}x{height} frame"
            )));
        }
        Ok(CameraGeometry {
            width,
            height,
            binning,
            beam_center,
        })
    }

    /// Square frame with the beam centered on the chip.
    pub fn centered(size: usize) -> Result<Self> {
        Self::new(size, size, 1, (size as f64 / 2.0, size as f64 / 2.0))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn binning(&self) -> u32 {
        self.binning
    }

    pub fn beam_center(&self) -> (f64, f64) {
        self.beam_center
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    /// Pixel containing a continuous position, if it falls on the chip.
    #[inline]
    pub fn pixel_at(&self, pos: (f64, f64)) -> Option<(usize, usize)> {
        let (x, y) = pos;
        if x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64 {
            Some((x as usize, y as usize))
        } else {
            None
        }
    }

    /// Point reflection of a continuous position through the beam center.
    #[inline]
    pub fn reflect(&self, pos: (f64, f64)) -> (f64, f64) {
        let (bx, by) = self.beam_center;
        (2.0 * bx - pos.0, 2.0 * by - pos.1)
    }

    /// Pixel that contains the reflection of pixel `(x, y)`'s center, rounded
    /// to nearest. May lie off the chip.
    pub fn reflect_pixel(&self, x: i64, y: i64) -> (i64, i64) {
        let (rx, ry) = self.reflect((x as f64 + 0.5, y as f64 + 0.5));
        ((rx - 0.5).round() as i64, (ry - 0.5).round() as i64)
    }

    /// Whole-frame region.
    pub fn full_region(&self, label: &str) -> Region {
        Region {
            x0: 0,
            y0: 0,
            w: self.width,
            h: self.height,
            label: label.to_string(),
        }
    }

    /// Same chip re-expressed on a grid coarser by `factor`.
    pub fn binned(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.width.is_multiple_of(factor) || !self.height.is_multiple_of(factor) {
            return Err(Error::Geometry(format!(
                "binning factor {factor} does not divide {}x{}",
                self.width, self.height
            )));
        }
        let f = factor as f64;
        Self::new(
            self.width / factor,
            self.height / factor,
            self.binning * factor as u32,
            (self.beam_center.0 / f, self.beam_center.1 / f),
        )
    }
}

/// Axis-aligned rectangle of pixels acting as one virtual detector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Region {
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    label: String,
}

impl Region {
    pub fn new(x0: usize, y0: usize, w: usize, h: usize, label: impl Into<String>) -> Result<Self> {
        if w == 0 || h == 0 {
            return Err(Error::Geometry(format!("region extents must be >= 1, got {w}x{h}")));
        }
        Ok(Region {
            x0,
            y0,
            w,
            h,
            label: label.into(),
        })
    }

    /// Region validated against a geometry.
    pub fn within(
        geometry: &CameraGeometry,
        x0: usize,
        y0: usize,
        w: usize,
        h: usize,
        label: impl Into<String>,
    ) -> Result<Self> {
        let r = Self::new(x0, y0, w, h, label)?;
        r.check_inside(geometry)?;
        Ok(r)
    }

    pub fn x0(&self) -> usize {
        self.x0
    }

    pub fn y0(&self) -> usize {
        self.y0
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn height(&self) -> usize {
        self.h
    }

    /// Exclusive right edge.
    pub fn x1(&self) -> usize {
        self.x0 + self.w
    }

    /// Exclusive bottom edge.
    pub fn y1(&self) -> usize {
        self.y0 + self.h
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn pixel_count(&self) -> usize {
        self.w * self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.x0 as f64 + self.w as f64 / 2.0,
            self.y0 as f64 + self.h as f64 / 2.0,
        )
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1() && y >= self.y0 && y < self.y1()
    }

    pub fn contains_region(&self, other: &Region) -> bool {
        other.x0 >= self.x0 && other.y0 >= self.y0 && other.x1() <= self.x1() && other.y1() <= self.y1()
    }

    pub fn intersects(&self, other: &Region) -> bool {
        self.x0 < other.x1() && other.x0 < self.x1() && self.y0 < other.y1() && other.y0 < self.y1()
    }

    pub fn is_inside(&self, geometry: &CameraGeometry) -> bool {
        self.x1() <= geometry.width() && self.y1() <= geometry.height()
    }

    pub fn check_inside(&self, geometry: &CameraGeometry) -> Result<()> {
        if self.is_inside(geometry) {
            Ok(())
        } else {
            Err(Error::Geometry(format!(
                "region {self} exceeds the {}x{} frame",
                geometry.width(),
                geometry.height()
            )))
        }
    }

    /// Grow by `margin` pixels on every side, clipped to the frame.
    pub fn dilate(&self, margin: usize, geometry: &CameraGeometry) -> Region {
        let x0 = self.x0.saturating_sub(margin);
        let y0 = self.y0.saturating_sub(margin);
        let x1 = (self.x1() + margin).min(geometry.width());
        let y1 = (self.y1() + margin).min(geometry.height());
        Region {
            x0,
            y0,
            w: x1 - x0,
            h: y1 - y0,
            label: self.label.clone(),
        }
    }

    /// Row-major frame indices of the region's pixels.
    pub fn indices<'a>(&'a self, geometry: &'a CameraGeometry) -> impl Iterator<Item = usize> + 'a {
        (self.y0..self.y1()).flat_map(move |y| (self.x0..self.x1()).map(move |x| geometry.index(x, y)))
    }

    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y0..self.y1()).flat_map(move |y| (self.x0..self.x1()).map(move |x| (x, y)))
    }

    /// Build from signed bounds `[x0, x1) × [y0, y1)` clipped to the frame.
    fn clipped(
        x0: i64,
        y0: i64,
        x1: i64,
        y1: i64,
        geometry: &CameraGeometry,
        label: &str,
    ) -> Option<Region> {
        let cx0 = x0.max(0);
        let cy0 = y0.max(0);
        let cx1 = x1.min(geometry.width() as i64);
        let cy1 = y1.min(geometry.height() as i64);
        if cx1 <= cx0 || cy1 <= cy0 {
            return None;
        }
        Some(Region {
            x0: cx0 as usize,
            y0: cy0 as usize,
            w: (cx1 - cx0) as usize,
            h: (cy1 - cy0) as usize,
            label: label.to_string(),
        })
    }
}

impl fmt::Display for Region {
    /// Formats as the CLI syntax `x0,y0,wxh`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}x{}", self.x0, self.y0, self.w, self.h)
    }
}

impl std::str::FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("region {s:?} is not of the form x0,y0,WxH"));
        let mut parts = s.trim().split(',');
        let x0 = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let y0 = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let ext = parts.next().ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        let (w, h) = ext.trim().split_once(['x', 'X']).ok_or_else(bad)?;
        let w = w.trim().parse().map_err(|_| bad())?;
        let h = h.trim().parse().map_err(|_| bad())?;
        Region::new(x0, y0, w, h, "region")
    }
}

/// Region where the heralded twins of photons detected in `reference` land:
/// the point reflection of `reference` through the beam center, grown by
/// `margin` on every side and clipped to the frame.
pub fn conjugate_region(reference: &Region, geometry: &CameraGeometry, margin: usize) -> Result<Region> {
    reference.check_inside(geometry)?;
    let (ax, ay) = geometry.reflect_pixel(reference.x0() as i64, reference.y0() as i64);
    let (bx, by) = geometry.reflect_pixel(reference.x1() as i64 - 1, reference.y1() as i64 - 1);
    let m = margin as i64;
    let (x0, x1) = (ax.min(bx) - m, ax.max(bx) + 1 + m);
    let (y0, y1) = (ay.min(by) - m, ay.max(by) + 1 + m);
    Region::clipped(x0, y0, x1, y1, geometry, "dut").ok_or_else(|| {
        Error::Geometry(format!("conjugate of region {reference} falls outside the frame"))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g64() -> CameraGeometry {
        CameraGeometry::centered(64).unwrap()
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(CameraGeometry::new(0, 4, 1, (0.0, 0.0)).is_err());
        assert!(CameraGeometry::new(4, 4, 0, (1.0, 1.0)).is_err());
        assert!(CameraGeometry::new(4, 4, 1, (5.0, 1.0)).is_err());
        assert!(Region::new(0, 0, 0, 3, "r").is_err());
        assert!(Region::within(&g64(), 60, 60, 5, 1, "r").is_err());
    }

    #[test]
    fn reflection_arithmetic() {
        let r = Region::new(10, 10, 4, 4, "reference").unwrap();
        let c = conjugate_region(&r, &g64(), 0).unwrap();
        assert_eq!((c.x0(), c.y0(), c.x1(), c.y1()), (50, 50, 54, 54));
    }

    #[test]
    fn centered_region_is_fixed_point() {
        let r = Region::new(30, 29, 4, 6, "reference").unwrap();
        let c = conjugate_region(&r, &g64(), 0).unwrap();
        assert_eq!(c.center(), r.center());
        assert_eq!((c.x0(), c.y0(), c.width(), c.height()), (30, 29, 4, 6));
    }

    #[test]
    fn margin_and_clipping() {
        let r = Region::new(10, 10, 4, 4, "reference").unwrap();
        let c = conjugate_region(&r, &g64(), 3).unwrap();
        assert_eq!((c.x0(), c.y0(), c.x1(), c.y1()), (47, 47, 57, 57));
        let c = conjugate_region(&r, &g64(), 20).unwrap();
        assert_eq!((c.x0(), c.y0(), c.x1(), c.y1()), (30, 30, 64, 64));
    }

    #[test]
    fn off_chip_reflection_is_an_error() {
        let g = CameraGeometry::new(64, 64, 1, (60.0, 60.0)).unwrap();
        let r = Region::new(0, 0, 4, 4, "reference").unwrap();
        assert!(conjugate_region(&r, &g, 0).is_err());
    }

    #[test]
    fn region_syntax() {
        let r: Region = "10,12,4x6".parse().unwrap();
        assert_eq!((r.x0(), r.y0(), r.width(), r.height()), (10, 12, 4, 6));
        assert_eq!(r.to_string(), "10,12,4x6");
        assert!("10,12".parse::<Region>().is_err());
        assert!("10,12,4*6".parse::<Region>().is_err());
        assert!("a,1,1x1".parse::<Region>().is_err());
    }

    #[test]
    fn binned_geometry() {
        let g = CameraGeometry::new(512, 512, 1, (256.0, 200.0)).unwrap();
        let b = g.binned(8).unwrap();
        assert_eq!((b.width(), b.height(), b.binning()), (64, 64, 8));
        assert_eq!(b.beam_center(), (32.0, 25.0));
        assert!(g.binned(3).is_err());
    }
}
