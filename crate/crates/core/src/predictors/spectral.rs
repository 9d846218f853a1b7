use crate::error::{Error, Result};

/// Sentinel-2 band predictor names, reflectance scaled by 10000.
pub const BAND_NAMES: [&str; 10] = [
    "s2_2", "s2_3", "s2_4", "s2_5", "s2_6", "s2_7", "s2_8", "s2_8A", "s2_11", "s2_12",
];

/// Normalized difference vegetation index from near-infrared (band 8) and red (band 4).
///
/// A zero denominator yields 0.
pub fn ndvi(s2_8: f64, s2_4: f64) -> Result<f64> {
    if s2_8 < 0.0 || s2_4 < 0.0 || !s2_8.is_finite() || !s2_4.is_finite() {
        return Err(Error::Domain(format!(
            "band values must be finite and non-negative, got s2_8={s2_8}, s2_4={s2_4}"
        )));
    }
    let sum = s2_8 + s2_4;
    Ok(if sum == 0.0 { 0.0 } else { (s2_8 - s2_4) / sum })
}

/// Band reflectances for one plot or cell plus the derived NDVI.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectralVector {
    bands: [Option<f64>; 10],
    ndvi: Option<f64>,
}

impl SpectralVector {
    /// Build from `(band name, value)` pairs; NDVI is derived when bands 8 and 4 exist.
    pub fn from_bands<'a>(bands: impl IntoIterator<Item = (&'a str, f64)>) -> Result<Self> {
        let mut out = SpectralVector::default();
        for (name, value) in bands {
            let i = BAND_NAMES
                .iter()
                .position(|b| *b == name)
                .ok_or_else(|| Error::Argument(format!("unknown band `{name}`")))?;
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::Domain(format!("band {name} has invalid value {value}")));
            }
            out.bands[i] = Some(value);
        }
        out.ndvi = match (out.band("s2_8"), out.band("s2_4")) {
            (Some(nir), Some(red)) => Some(ndvi(nir, red)?),
            _ => None,
        };
        Ok(out)
    }

    pub fn band(&self, name: &str) -> Option<f64> {
        BAND_NAMES.iter().position(|b| *b == name).and_then(|i| self.bands[i])
    }

    pub fn ndvi(&self) -> Option<f64> {
        self.ndvi
    }

    /// Every spectral predictor, band order then NDVI.
    pub fn iter(&self) -> impl Iterator<Item = (&'static str, Option<f64>)> + '_ {
        BAND_NAMES
            .iter()
            .copied()
            .zip(self.bands.iter().copied())
            .chain(std::iter::once(("NDVI", self.ndvi)))
    }
}
