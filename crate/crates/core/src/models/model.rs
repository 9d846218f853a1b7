use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::predictors::{is_known_term, PredictorVector, TermIssue, H95, H95_SQUARED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Species {
    Spruce,
    Pine,
    Birch,
}

impl Species {
    pub const ALL: [Species; 3] = [Species::Spruce, Species::Pine, Species::Birch];

    /// Species-map raster code.
    pub fn code(self) -> u8 {
        match self {
            Species::Spruce => 1,
            Species::Pine => 2,
            Species::Birch => 3,
        }
    }

    pub fn from_code(code: f64) -> Option<Species> {
        match code {
            c if c == 1.0 => Some(Species::Spruce),
            c if c == 2.0 => Some(Species::Pine),
            c if c == 3.0 => Some(Species::Birch),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Species::Spruce => "spruce",
            Species::Pine => "pine",
            Species::Birch => "birch",
        }
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Species {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spruce" | "1" => Ok(Species::Spruce),
            "pine" | "2" => Ok(Species::Pine),
            "birch" | "3" => Ok(Species::Birch),
            other => Err(Error::Argument(format!("unknown species `{other}`"))),
        }
    }
}

/// Transformation applied to age before the linear fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Link {
    Log,
    Sqrt,
    Identity,
}

impl Link {
    pub const ALL: [Link; 3] = [Link::Log, Link::Sqrt, Link::Identity];

    pub fn name(self) -> &'static str {
        match self {
            Link::Log => "log",
            Link::Sqrt => "sqrt",
            Link::Identity => "identity",
        }
    }

    /// Forward transform of an observed age.
    pub fn apply(self, age: f64) -> f64 {
        match self {
            Link::Log => age.ln(),
            Link::Sqrt => age.sqrt(),
            Link::Identity => age,
        }
    }

    /// Mean-preserving back-transform of a linear predictor with residual sd `sigma`.
    ///
    /// Log adds half the residual variance before exponentiating; sqrt adds the
    /// variance to the squared mean. Negative sqrt/identity predictors clamp to 0.
    pub fn back_transform(self, eta: f64, sigma: f64) -> f64 {
        match self {
            Link::Log => (eta + 0.5 * sigma * sigma).exp(),
            Link::Sqrt if eta < 0.0 => 0.0,
            Link::Sqrt => eta * eta + sigma * sigma,
            Link::Identity => eta.max(0.0),
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "log" => Ok(Link::Log),
            "sqrt" => Ok(Link::Sqrt),
            "identity" => Ok(Link::Identity),
            other => Err(Error::Argument(format!("unknown link `{other}`"))),
        }
    }
}

/// Ordered site-index levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiClassSet {
    levels: Vec<u8>,
}

impl SiClassSet {
    pub fn new(levels: Vec<u8>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Config("site-index level set is empty".into()));
        }
        if !levels.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config(format!("site-index levels must increase: {levels:?}")));
        }
        Ok(Self { levels })
    }

    /// The eight levels 6, 8, 11, 14, 17, 20, 23, 26.
    pub fn standard() -> Self {
        Self {
            levels: vec![6, 8, 11, 14, 17, 20, 23, 26],
        }
    }

    pub fn levels(&self) -> &[u8] {
        &self.levels
    }
}

/// Closest level to `value`; ties go to the lower level, out-of-range values clamp.
pub fn snap_si(value: f64, available: &SiClassSet) -> Result<u8> {
    if !value.is_finite() {
        return Err(Error::Domain(format!("site index {value} is not finite")));
    }
    Ok(nearest_level(value, available.levels()))
}

/// Nearest of a non-empty increasing level list, ties to the lower level.
pub(crate) fn nearest_level(value: f64, levels: &[u8]) -> u8 {
    let mut best = levels[0];
    for &l in &levels[1..] {
        if (l as f64 - value).abs() < (best as f64 - value).abs() {
            best = l;
        }
    }
    best
}

/// One linear model on the link scale for a (species, site index) stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeModel {
    pub species: Species,
    pub si: u8,
    pub link: Link,
    pub intercept: f64,
    pub terms: Vec<(String, f64)>,
    /// Residual standard error on the link scale.
    pub sigma: f64,
}

impl AgeModel {
    pub fn new(
        species: Species,
        si: u8,
        link: Link,
        intercept: f64,
        terms: Vec<(String, f64)>,
        sigma: f64,
    ) -> Result<Self> {
        let model = Self {
            species,
            si,
            link,
            intercept,
            terms,
            sigma,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("{}: sigma must be >= 0, got {}", self.label(), self.sigma)));
        }
        if !self.intercept.is_finite() || self.terms.iter().any(|(_, b)| !b.is_finite()) {
            return Err(Error::Config(format!("{}: non-finite coefficient", self.label())));
        }
        for (i, (name, _)) in self.terms.iter().enumerate() {
            if self.terms[..i].iter().any(|(n, _)| n == name) {
                return Err(Error::Config(format!("{}: duplicate term `{name}`", self.label())));
            }
        }
        let unknown: Vec<String> = self
            .terms
            .iter()
            .filter(|(n, _)| !is_known_term(n))
            .map(|(n, _)| n.clone())
            .collect();
        if !unknown.is_empty() {
            return Err(Error::UnknownPredictors(unknown));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!("{} SI {}", self.species, self.si)
    }

    pub fn uses(&self, name: &str) -> bool {
        self.terms.iter().any(|(n, _)| n == name)
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|(n, _)| n == name).map(|(_, b)| *b)
    }

    /// Intercept plus the weighted predictor terms.
    pub fn linear_predictor(&self, x: &PredictorVector) -> Result<f64> {
        let mut eta = self.intercept;
        for (name, beta) in &self.terms {
            let v = x.term(name).map_err(|issue| {
                let predictor = match issue {
                    TermIssue::Missing(n) | TermIssue::Unknown(n) => n,
                };
                Error::Inapplicable {
                    model: self.label(),
                    predictor,
                }
            })?;
            eta += beta * v;
        }
        Ok(eta)
    }
}

/// Predicted age in years, back-transformed with the model's bias correction.
pub fn predict_age(model: &AgeModel, x: &PredictorVector) -> Result<f64> {
    let eta = model.linear_predictor(x)?;
    Ok(model.link.back_transform(eta, model.sigma))
}

/// Predicted age over an evenly spaced sweep of one predictor.
///
/// Sweeping `h95_first` moves `h95_first2` with it; the square itself cannot
/// be swept.
pub fn response_curve(
    model: &AgeModel,
    sweep: &str,
    range: (f64, f64),
    steps: usize,
    baseline: &PredictorVector,
) -> Result<Vec<(f64, f64)>> {
    if sweep == H95_SQUARED {
        return Err(Error::Argument(format!("{H95_SQUARED} is derived from {H95} and cannot be swept")));
    }
    let used = model.uses(sweep) || (sweep == H95 && model.uses(H95_SQUARED));
    if !used {
        return Err(Error::Argument(format!("{} does not use predictor `{sweep}`", model.label())));
    }
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) || steps == 0 {
        return Err(Error::Argument(format!("invalid sweep range [{lo}, {hi}] with {steps} steps")));
    }
    let mut x = baseline.clone();
    (0..steps)
        .map(|i| {
            let v = if steps == 1 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / (steps - 1) as f64
            };
            x.set(sweep, v);
            predict_age(model, &x).map(|age| (v, age))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(terms: &[(&str, f64)], intercept: f64, sigma: f64) -> AgeModel {
        AgeModel::new(
            Species::Spruce,
            26,
            Link::Log,
            intercept,
            terms.iter().map(|(n, b)| (n.to_string(), *b)).collect(),
            sigma,
        )
        .unwrap()
    }

    #[test]
    fn intercept_only_at_zero_sigma() {
        let m = model(&[], 50f64.ln(), 0.0);
        let age = predict_age(&m, &PredictorVector::new()).unwrap();
        assert!((age - 50.0).abs() < 1e-12);
    }

    #[test]
    fn missing_predictor_names_it() {
        let m = model(&[("h95_first", 0.05), ("s2_11", 1e-4)], 3.0, 0.1);
        let x = PredictorVector::from_pairs([("h95_first", 10.0)]);
        match predict_age(&m, &x) {
            Err(Error::Inapplicable { predictor, .. }) => assert_eq!(predictor, "s2_11"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn model_validation() {
        let dup = AgeModel::new(
            Species::Pine,
            8,
            Link::Log,
            1.0,
            vec![("cc2".into(), 1.0), ("cc2".into(), 2.0)],
            0.1,
        );
        assert!(dup.is_err());
        let neg = AgeModel::new(Species::Pine, 8, Link::Log, 1.0, vec![], -0.1);
        assert!(neg.is_err());
        let unknown = AgeModel::new(Species::Pine, 8, Link::Log, 1.0, vec![("h99_first".into(), 1.0)], 0.1);
        assert!(matches!(unknown, Err(Error::UnknownPredictors(_))));
    }

    #[test]
    fn back_transforms() {
        assert_eq!(Link::Identity.back_transform(-3.0, 1.0), 0.0);
        assert_eq!(Link::Identity.back_transform(3.0, 1.0), 3.0);
        assert_eq!(Link::Sqrt.back_transform(-3.0, 1.0), 0.0);
        assert_eq!(Link::Sqrt.back_transform(3.0, 0.5), 9.25);
        assert_eq!(Link::Log.back_transform(2.0, 0.0), 2f64.exp());
    }

    #[test]
    fn snapping() {
        let s = SiClassSet::standard();
        assert_eq!(snap_si(12.4, &s).unwrap(), 11);
        assert_eq!(snap_si(12.5, &s).unwrap(), 11);
        assert_eq!(snap_si(12.6, &s).unwrap(), 14);
        assert_eq!(snap_si(30.0, &s).unwrap(), 26);
        assert_eq!(snap_si(-4.0, &s).unwrap(), 6);
        assert!(snap_si(f64::NAN, &s).is_err());
        assert!(matches!(SiClassSet::new(vec![]), Err(Error::Config(_))));
        assert!(SiClassSet::new(vec![8, 6]).is_err());
    }

    #[test]
    fn curve_errors() {
        let m = model(&[("h95_first", 0.05), ("cc5", -0.4)], 3.0, 0.06);
        let base = PredictorVector::from_pairs([("h95_first", 10.0), ("cc5", 0.5)]);
        assert!(response_curve(&m, "h95_first2", (0.0, 1.0), 3, &base).is_err());
        assert!(response_curve(&m, "DTM", (0.0, 1.0), 3, &base).is_err());
        assert!(response_curve(&m, "cc5", (1.0, 0.0), 3, &base).is_err());
        let c = response_curve(&m, "cc5", (0.0, 1.0), 5, &base).unwrap();
        assert_eq!(c.len(), 5);
        assert_eq!(c[4].0, 1.0);
        assert!(c.windows(2).all(|w| w[1].1 < w[0].1));
    }

    #[test]
    fn zero_coefficient_sweep_is_flat() {
        let m = model(&[("h95_first", 0.0)], 4.0, 0.2);
        let c = response_curve(&m, "h95_first", (0.0, 32.0), 33, &PredictorVector::new()).unwrap();
        assert!(c.iter().all(|(_, a)| *a == c[0].1));
    }

    proptest! {
        #[test]
        fn log_link_positive_and_monotone(
            b in 1e-4f64..1.0, v in -50.0f64..50.0, dv in 1e-3f64..10.0, sigma in 0.0f64..1.0,
        ) {
            let m = model(&[("Lat", b), ("cc2", -0.3)], 0.5, sigma);
            let x1 = PredictorVector::from_pairs([("Lat", v), ("cc2", 0.4)]);
            let x2 = PredictorVector::from_pairs([("Lat", v + dv), ("cc2", 0.4)]);
            let a1 = predict_age(&m, &x1).unwrap();
            let a2 = predict_age(&m, &x2).unwrap();
            prop_assert!(a1 > 0.0);
            prop_assert!(a2 > a1);
        }

        #[test]
        fn snapping_idempotent(v in -10.0f64..40.0) {
            let s = SiClassSet::standard();
            let once = snap_si(v, &s).unwrap();
            prop_assert_eq!(snap_si(once as f64, &s).unwrap(), once);
        }
    }
}
