use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::predictors::metrics::{MetricSpec, MetricsVector};
use crate::predictors::spectral::{SpectralVector, BAND_NAMES};

pub const TERRAIN_NAMES: [&str; 5] = ["DTM", "slope", "distC", "Lat", "Lon"];
pub const DIFF_T: &str = "diffT";
pub const NDVI: &str = "NDVI";
pub const H95: &str = "h95_first";
/// Square of `h95_first`, always derived and never set independently.
pub const H95_SQUARED: &str = "h95_first2";

/// Terrain and location predictors for one plot or cell.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TerrainInputs {
    pub dtm: Option<f64>,
    pub slope: Option<f64>,
    pub dist_c: Option<f64>,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
}

impl TerrainInputs {
    fn iter(&self) -> impl Iterator<Item = (&'static str, Option<f64>)> {
        TERRAIN_NAMES
            .into_iter()
            .zip([self.dtm, self.slope, self.dist_c, self.lat, self.lon])
    }
}

/// Why a model term could not be evaluated against a vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TermIssue {
    /// The predictor exists but is missing for this plot or cell.
    Missing(String),
    /// The name is not a predictor at all.
    Unknown(String),
}

/// Named predictor values; `None` records a known-but-missing predictor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictorVector {
    values: BTreeMap<String, Option<f64>>,
}

impl PredictorVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        let mut v = Self::new();
        for (k, x) in pairs {
            v.set(k, x);
        }
        v
    }

    /// Insert a new entry; a repeated name is an assembly error.
    pub fn insert(&mut self, name: &str, value: Option<f64>) -> Result<()> {
        if self.values.contains_key(name) {
            return Err(Error::Collision(name.to_string()));
        }
        self.values.insert(name.to_string(), value.filter(|v| v.is_finite()));
        Ok(())
    }

    /// Insert or overwrite. Setting `h95_first` refreshes its square.
    pub fn set(&mut self, name: &str, value: f64) {
        let value = Some(value).filter(|v| v.is_finite());
        self.values.insert(name.to_string(), value);
        if name == H95 {
            self.values.insert(H95_SQUARED.to_string(), value.map(|h| h * h));
        }
    }

    pub fn set_missing(&mut self, name: &str) {
        self.values.insert(name.to_string(), None);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied().flatten()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.values.contains_key(name)
    }

    pub fn is_missing(&self, name: &str) -> bool {
        matches!(self.values.get(name), Some(None))
    }

    pub fn missing(&self) -> impl Iterator<Item = &str> {
        self.values.iter().filter(|(_, v)| v.is_none()).map(|(k, _)| k.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Option<f64>)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value of a model term: a predictor name, `a:b` (product) or `a^2` (square).
    pub fn term(&self, term: &str) -> Result<f64, TermIssue> {
        if let Some(v) = self.values.get(term) {
            return v.ok_or_else(|| TermIssue::Missing(term.to_string()));
        }
        if let Some((a, b)) = term.split_once(':') {
            return Ok(self.term(a)? * self.term(b)?);
        }
        if let Some(base) = term.strip_suffix("^2") {
            let v = self.term(base)?;
            return Ok(v * v);
        }
        if term == H95_SQUARED && self.values.contains_key(H95) {
            let h = self.term(H95)?;
            return Ok(h * h);
        }
        if is_known_term(term) {
            Err(TermIssue::Missing(term.to_string()))
        } else {
            Err(TermIssue::Unknown(term.to_string()))
        }
    }
}

/// Every base predictor name a model may reference.
pub fn known_predictor_names() -> Vec<String> {
    let mut names: Vec<String> = MetricSpec::default_spec().names().to_vec();
    names.extend(BAND_NAMES.iter().map(|s| s.to_string()));
    names.push(NDVI.into());
    names.extend(TERRAIN_NAMES.iter().map(|s| s.to_string()));
    names.push(DIFF_T.into());
    names.push(H95_SQUARED.into());
    names
}

fn is_known_base(name: &str) -> bool {
    name == H95_SQUARED
        || name == NDVI
        || name == DIFF_T
        || TERRAIN_NAMES.contains(&name)
        || BAND_NAMES.contains(&name)
        || MetricSpec::default_spec().position(name).is_some()
}

/// True for base predictors and their `a:b` / `a^2` compositions.
pub fn is_known_term(term: &str) -> bool {
    if let Some((a, b)) = term.split_once(':') {
        return is_known_term(a) && is_known_term(b);
    }
    if let Some(base) = term.strip_suffix("^2") {
        return is_known_base(base);
    }
    is_known_base(term)
}

/// Merge metric, spectral, terrain and timing inputs into one predictor vector.
///
/// Absent spectral input marks every spectral predictor as missing.
pub fn assemble_predictors(
    metrics: &MetricsVector,
    spectral: Option<&SpectralVector>,
    terrain: &TerrainInputs,
    diff_t: Option<f64>,
) -> Result<PredictorVector> {
    let mut out = PredictorVector::new();
    for (name, v) in metrics.iter() {
        out.insert(name, v)?;
    }
    match spectral {
        Some(s) => {
            for (name, v) in s.iter() {
                out.insert(name, v)?;
            }
        }
        None => {
            for name in BAND_NAMES.iter().copied().chain([NDVI]) {
                out.insert(name, None)?;
            }
        }
    }
    for (name, v) in terrain.iter() {
        out.insert(name, v)?;
    }
    out.insert(DIFF_T, diff_t)?;
    let h95 = metrics.get(H95);
    out.insert(H95_SQUARED, h95.map(|h| h * h))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodata::{PointCloud, PointRecord, ReturnClass};
    use crate::predictors::als_metrics;

    fn metrics() -> MetricsVector {
        let points = (0..50)
            .map(|i| PointRecord {
                x: 0.0,
                y: 0.0,
                z: i as f64 * 0.4,
                return_class: ReturnClass::Only,
            })
            .collect();
        als_metrics(&PointCloud::new(points, true)).unwrap()
    }

    fn terrain() -> TerrainInputs {
        TerrainInputs {
            dtm: Some(300.0),
            slope: Some(5.0),
            dist_c: Some(40_000.0),
            lat: Some(61.0),
            lon: Some(10.0),
        }
    }

    #[test]
    fn square_is_derived() {
        let mut v = PredictorVector::new();
        v.set(H95, 10.0);
        assert_eq!(v.get(H95_SQUARED), Some(100.0));
        let m = metrics();
        let p = assemble_predictors(&m, None, &terrain(), Some(0.0)).unwrap();
        let h = m.get(H95).unwrap();
        assert_eq!(p.get(H95_SQUARED), Some(h * h));
    }

    #[test]
    fn spectral_absence_is_recorded() {
        let p = assemble_predictors(&metrics(), None, &terrain(), Some(1.0)).unwrap();
        assert!(p.is_missing("s2_11"));
        assert!(p.is_missing(NDVI));
        assert_eq!(p.term("s2_11"), Err(TermIssue::Missing("s2_11".into())));
    }

    #[test]
    fn full_assembly_resolves_every_name() {
        let s = SpectralVector::from_bands(BAND_NAMES.iter().map(|b| (*b, 1000.0))).unwrap();
        let p = assemble_predictors(&metrics(), Some(&s), &terrain(), Some(2.0)).unwrap();
        for name in known_predictor_names() {
            assert!(p.term(&name).is_ok(), "{name}");
        }
    }

    #[test]
    fn collisions_are_errors() {
        let mut v = PredictorVector::new();
        v.insert("DTM", Some(1.0)).unwrap();
        assert!(matches!(v.insert("DTM", Some(2.0)), Err(Error::Collision(_))));
    }

    #[test]
    fn composite_terms() {
        let v = PredictorVector::from_pairs([("cc2", 0.5), ("Lat", 60.0)]);
        assert_eq!(v.term("cc2:Lat"), Ok(30.0));
        assert_eq!(v.term("Lat^2"), Ok(3600.0));
        assert_eq!(v.term("h99_first"), Err(TermIssue::Unknown("h99_first".into())));
        assert_eq!(v.term("DTM"), Err(TermIssue::Missing("DTM".into())));
        assert!(is_known_term("cc2:Lat"));
        assert!(!is_known_term("h99_last"));
        assert!(!is_known_term("foo^2"));
    }
}
