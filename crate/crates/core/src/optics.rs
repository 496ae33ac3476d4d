//! Spectral bands, optical transmission and SPDC energy conservation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Top-hat bandpass: full transmission inside `[center − fwhm/2, center + fwhm/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BandRepr", into = "BandRepr")]
pub struct WavelengthBand {
    center: f64,
    fwhm: f64,
    transmission: f64,
}

#[derive(Serialize, Deserialize)]
struct BandRepr {
    center: f64,
    fwhm: f64,
    #[serde(default = "one")]
    transmission: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<BandRepr> for WavelengthBand {
    type Error = Error;

    fn try_from(r: BandRepr) -> Result<Self> {
        WavelengthBand::new(r.center, r.fwhm, r.transmission)
    }
}

impl From<WavelengthBand> for BandRepr {
    fn from(b: WavelengthBand) -> Self {
        BandRepr {
            center: b.center,
            fwhm: b.fwhm,
            transmission: b.transmission,
        }
    }
}

impl WavelengthBand {
    pub fn new(center: f64, fwhm: f64, transmission: f64) -> Result<Self> {
        if !(center > 0.0 && center.is_finite()) {
            return Err(Error::Config(format!("band center must be > 0 nm, got {center}")));
        }
        if !(fwhm > 0.0 && fwhm.is_finite()) {
            return Err(Error::Config(format!("band FWHM must be > 0 nm, got {fwhm}")));
        }
        if !(transmission > 0.0 && transmission <= 1.0) {
            return Err(Error::Config(format!(
                "band transmission must be in (0, 1], got {transmission}"
            )));
        }
        Ok(WavelengthBand {
            center,
            fwhm,
            transmission,
        })
    }

    /// Band spanning `[lower, upper]` with unit transmission.
    pub fn from_edges(lower: f64, upper: f64) -> Result<Self> {
        Self::new((lower + upper) / 2.0, upper - lower, 1.0)
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn fwhm(&self) -> f64 {
        self.fwhm
    }

    pub fn transmission(&self) -> f64 {
        self.transmission
    }

    pub fn lower(&self) -> f64 {
        self.center - self.fwhm / 2.0
    }

    pub fn upper(&self) -> f64 {
        self.center + self.fwhm / 2.0
    }

    #[inline]
    pub fn contains(&self, lambda: f64) -> bool {
        lambda >= self.lower() && lambda <= self.upper()
    }

    pub fn covers(&self, other: &WavelengthBand) -> bool {
        other.lower() >= self.lower() && other.upper() <= self.upper()
    }

    /// Image of this band under SPDC energy conservation with the given pump.
    pub fn conjugate(&self, lambda_pump: f64) -> Result<WavelengthBand> {
        let a = conjugate_wavelength(self.upper(), lambda_pump)?;
        let b = conjugate_wavelength(self.lower(), lambda_pump)?;
        WavelengthBand::new((a + b) / 2.0, b - a, self.transmission)
    }
}

/// Wavelength of the twin photon: `1/λ_pump = 1/λ_ref + 1/λ_conj`.
pub fn conjugate_wavelength(lambda_ref: f64, lambda_pump: f64) -> Result<f64> {
    if !(lambda_pump > 0.0 && lambda_ref > lambda_pump && lambda_ref.is_finite()) {
        return Err(Error::Domain(format!(
            "no conjugate wavelength for {lambda_ref} nm with a {lambda_pump} nm pump"
        )));
    }
    Ok(1.0 / (1.0 / lambda_pump - 1.0 / lambda_ref))
}

/// Chain of transmissive elements between the source and the camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelRepr", into = "ChannelRepr")]
pub struct OpticalChannel {
    elements: Vec<(String, f64)>,
    total_transmission: f64,
}

#[derive(Serialize, Deserialize)]
struct ChannelRepr {
    elements: Vec<(String, f64)>,
}

impl TryFrom<ChannelRepr> for OpticalChannel {
    type Error = Error;

    fn try_from(r: ChannelRepr) -> Result<Self> {
        OpticalChannel::new(r.elements)
    }
}

impl From<OpticalChannel> for ChannelRepr {
    fn from(c: OpticalChannel) -> Self {
        ChannelRepr { elements: c.elements }
    }
}

impl OpticalChannel {
    pub fn new(elements: Vec<(String, f64)>) -> Result<Self> {
        for (name, t) in &elements {
            if !(*t > 0.0 && *t <= 1.0) {
                return Err(Error::Config(format!(
                    "transmission of {name:?} must be in (0, 1], got {t}"
                )));
            }
        }
        let total_transmission = elements.iter().map(|(_, t)| t).product();
        Ok(OpticalChannel {
            elements,
            total_transmission,
        })
    }

    /// Lossless channel.
    pub fn ideal() -> Self {
        OpticalChannel {
            elements: Vec::new(),
            total_transmission: 1.0,
        }
    }

    pub fn single(name: &str, transmission: f64) -> Result<Self> {
        Self::new(vec![(name.to_string(), transmission)])
    }

    pub fn with_element(&self, name: &str, transmission: f64) -> Result<Self> {
        let mut elements = self.elements.clone();
        elements.push((name.to_string(), transmission));
        Self::new(elements)
    }

    pub fn elements(&self) -> &[(String, f64)] {
        &self.elements
    }

    pub fn total_transmission(&self) -> f64 {
        self.total_transmission
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_conjugate() {
        assert_eq!(conjugate_wavelength(810.0, 405.0).unwrap(), 810.0);
    }

    #[test]
    fn nondegenerate_conjugates() {
        // 405*830/425
        let c = conjugate_wavelength(830.0, 405.0).unwrap();
        assert!((c - 790.941).abs() < 1e-3, "{c}");
        // 405*780/375
        let c = conjugate_wavelength(780.0, 405.0).unwrap();
        assert!((c - 842.4).abs() < 1e-9, "{c}");
    }

    #[test]
    fn conjugate_domain_errors() {
        assert!(conjugate_wavelength(405.0, 405.0).is_err());
        assert!(conjugate_wavelength(300.0, 405.0).is_err());
        assert!(conjugate_wavelength(800.0, 0.0).is_err());
    }

    #[test]
    fn band_validation() {
        assert!(WavelengthBand::new(0.0, 10.0, 1.0).is_err());
        assert!(WavelengthBand::new(780.0, 0.0, 1.0).is_err());
        assert!(WavelengthBand::new(780.0, 10.0, 0.0).is_err());
        assert!(WavelengthBand::new(780.0, 10.0, 1.01).is_err());
        let b = WavelengthBand::new(780.0, 10.0, 0.94).unwrap();
        assert!(b.contains(775.0) && b.contains(785.0) && !b.contains(785.1));
    }

    #[test]
    fn conjugate_band() {
        let b = WavelengthBand::new(780.0, 10.0, 1.0).unwrap();
        let c = b.conjugate(405.0).unwrap();
        assert!((c.lower() - conjugate_wavelength(785.0, 405.0).unwrap()).abs() < 1e-9);
        assert!((c.upper() - conjugate_wavelength(775.0, 405.0).unwrap()).abs() < 1e-9);
        let dut = WavelengthBand::new(850.0, 40.0, 0.95).unwrap();
        assert!(dut.covers(&c));
    }

    #[test]
    fn channel_product() {
        let ch = OpticalChannel::new(vec![
            ("LF1".into(), 0.95),
            ("lens".into(), 0.99),
            ("LF2".into(), 0.95),
        ])
        .unwrap();
        let direct = 0.95 * 0.99 * 0.95;
        assert!((ch.total_transmission() - direct).abs() <= 1e-12 * direct);
        assert!(OpticalChannel::new(vec![("bad".into(), 1.2)]).is_err());
        assert_eq!(OpticalChannel::single("total", 0.88).unwrap().total_transmission(), 0.88);
        assert_eq!(OpticalChannel::ideal().total_transmission(), 1.0);
    }
}
