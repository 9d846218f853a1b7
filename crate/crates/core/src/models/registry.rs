use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::models::builtin::{PublishedModel, PUBLISHED_MODELS};
use crate::models::model::{nearest_level, AgeModel, Link, Species};
use crate::predictors::is_known_term;

pub const BUILTIN_PROVENANCE: &str = "builtin-published";

/// Age models keyed by (species, site index).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRegistry {
    models: BTreeMap<(Species, u8), AgeModel>,
    pub provenance: String,
}

/// Outcome of routing a cell or plot to a model.
#[derive(Debug, Clone, Copy)]
pub struct Routed<'a> {
    pub model: &'a AgeModel,
    /// The requested site index had no model and a neighbouring one was used.
    pub substituted: bool,
}

impl ModelRegistry {
    pub fn new(provenance: impl Into<String>) -> Self {
        Self {
            models: BTreeMap::new(),
            provenance: provenance.into(),
        }
    }

    /// The 22 published models (8 spruce, 7 pine, 7 birch).
    pub fn builtin() -> Self {
        let mut reg = Self::new(BUILTIN_PROVENANCE);
        for published in &PUBLISHED_MODELS {
            reg.insert(model_from_published(published))
                .expect("published models are unique");
        }
        reg
    }

    pub fn insert(&mut self, model: AgeModel) -> Result<()> {
        model.validate()?;
        let key = (model.species, model.si);
        if self.models.contains_key(&key) {
            return Err(Error::Config(format!("duplicate model for {}", model.label())));
        }
        self.models.insert(key, model);
        Ok(())
    }

    pub fn get(&self, species: Species, si: u8) -> Option<&AgeModel> {
        self.models.get(&(species, si))
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn models(&self) -> impl Iterator<Item = &AgeModel> {
        self.models.values()
    }

    pub fn models_mut(&mut self) -> impl Iterator<Item = &mut AgeModel> {
        self.models.values_mut()
    }

    /// Site-index levels with a model for `species`, increasing.
    pub fn levels(&self, species: Species) -> Vec<u8> {
        self.models.keys().filter(|(s, _)| *s == species).map(|(_, si)| *si).collect()
    }

    /// Exact (species, si) model, else the same species at the nearest site
    /// index (ties to the lower level).
    pub fn route(&self, species: Species, si: u8) -> Result<Routed<'_>> {
        if let Some(model) = self.get(species, si) {
            return Ok(Routed {
                model,
                substituted: false,
            });
        }
        let levels = self.levels(species);
        if levels.is_empty() {
            return Err(Error::Routing(species.to_string()));
        }
        let nearest = nearest_level(si as f64, &levels);
        Ok(Routed {
            model: &self.models[&(species, nearest)],
            substituted: true,
        })
    }

    /// Every model's predictor names, deduplicated and sorted.
    pub fn predictor_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .models()
            .flat_map(|m| m.terms.iter().map(|(n, _)| n.clone()))
            .collect();
        names.sort();
        names.dedup();
        names
    }
}

/// Convenience wrapper over [`ModelRegistry::route`].
pub fn route_model(registry: &ModelRegistry, species: Species, si: u8) -> Result<Routed<'_>> {
    registry.route(species, si)
}

fn model_from_published(p: &PublishedModel) -> AgeModel {
    let parse = |s: &str| -> f64 { s.parse().expect("published estimate parses") };
    let (intercept, rest) = p.rows.split_first().expect("published model has an intercept row");
    AgeModel {
        species: p.species,
        si: p.si,
        link: Link::Log,
        intercept: parse(intercept.estimate),
        terms: rest.iter().map(|r| (r.variable.to_string(), parse(r.estimate))).collect(),
        sigma: parse(p.sigma),
    }
}

pub fn format_registry(registry: &ModelRegistry) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# provenance {}", registry.provenance);
    for m in registry.models() {
        let _ = writeln!(
            out,
            "[model species={} si={} link={} sigma={:.16e}]",
            m.species, m.si, m.link, m.sigma
        );
        let _ = writeln!(out, "intercept {:.16e}", m.intercept);
        for (name, beta) in &m.terms {
            let _ = writeln!(out, "term {name} {beta:.16e}");
        }
    }
    out
}

pub fn save_registry(registry: &ModelRegistry, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_registry(registry)).map_err(|e| Error::io(path, e))
}

pub fn load_registry(path: impl AsRef<Path>) -> Result<ModelRegistry> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_registry(&text, path)
}

pub fn parse_registry(text: &str, path: &Path) -> Result<ModelRegistry> {
    struct Block {
        line: usize,
        species: Species,
        si: u8,
        link: Link,
        sigma: f64,
        intercept: Option<f64>,
        terms: Vec<(String, f64)>,
    }

    let mut provenance = String::from("file");
    let mut blocks: Vec<Block> = Vec::new();
    let float = |s: &str, line: usize| -> Result<f64> {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::format(path, line, format!("bad number `{s}`")))
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.trim();
        if s.is_empty() {
            continue;
        }
        if let Some(c) = s.strip_prefix('#') {
            if let Some(p) = c.trim().strip_prefix("provenance") {
                provenance = p.trim().to_string();
            }
            continue;
        }
        if let Some(header) = s.strip_prefix("[model").and_then(|h| h.strip_suffix(']')) {
            let mut species = None;
            let mut si = None;
            let mut link = None;
            let mut sigma = None;
            for kv in header.split_whitespace() {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::format(path, line, format!("bad header field `{kv}`")))?;
                match k {
                    "species" => species = Some(v.parse::<Species>().map_err(|e| Error::format(path, line, e.to_string()))?),
                    "si" => {
                        si = Some(v.parse::<u8>().map_err(|_| Error::format(path, line, format!("bad si `{v}`")))?)
                    }
                    "link" => link = Some(v.parse::<Link>().map_err(|e| Error::format(path, line, e.to_string()))?),
                    "sigma" => sigma = Some(float(v, line)?),
                    other => return Err(Error::format(path, line, format!("unknown header field `{other}`"))),
                }
            }
            let missing = |f: &str| Error::format(path, line, format!("model header lacks `{f}`"));
            blocks.push(Block {
                line,
                species: species.ok_or_else(|| missing("species"))?,
                si: si.ok_or_else(|| missing("si"))?,
                link: link.ok_or_else(|| missing("link"))?,
                sigma: sigma.ok_or_else(|| missing("sigma"))?,
                intercept: None,
                terms: Vec::new(),
            });
            continue;
        }
        let block = blocks
            .last_mut()
            .ok_or_else(|| Error::format(path, line, "coefficient line before any [model] header"))?;
        let toks: Vec<&str> = s.split_whitespace().collect();
        match toks.as_slice() {
            ["intercept", v] => {
                if block.intercept.replace(float(v, line)?).is_some() {
                    return Err(Error::format(path, line, "second intercept in model block"));
                }
            }
            ["term", name, v] => block.terms.push((name.to_string(), float(v, line)?)),
            _ => return Err(Error::format(path, line, format!("unrecognised line `{s}`"))),
        }
    }

    let unknown: Vec<String> = blocks
        .iter()
        .flat_map(|b| b.terms.iter().map(|(n, _)| n))
        .filter(|n| !is_known_term(n))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownPredictors(unknown));
    }

    let mut reg = ModelRegistry::new(provenance);
    for b in blocks {
        let intercept = b
            .intercept
            .ok_or_else(|| Error::format(path, b.line, "model block without intercept"))?;
        let model = AgeModel::new(b.species, b.si, b.link, intercept, b.terms, b.sigma)
            .map_err(|e| Error::format(path, b.line, e.to_string()))?;
        reg.insert(model).map_err(|e| Error::format(path, b.line, e.to_string()))?;
    }
    Ok(reg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::predict_age;
    use crate::predictors::PredictorVector;

    #[test]
    fn builtin_counts() {
        let reg = ModelRegistry::builtin();
        assert_eq!(reg.len(), 22);
        assert_eq!(reg.levels(Species::Spruce), vec![6, 8, 11, 14, 17, 20, 23, 26]);
        assert_eq!(reg.levels(Species::Pine), vec![6, 8, 11, 14, 17, 20, 23]);
        assert_eq!(reg.levels(Species::Birch), vec![6, 8, 11, 14, 17, 20, 23]);
        let pine23 = reg.get(Species::Pine, 23).unwrap();
        assert_eq!(pine23.terms, vec![("h95_first".to_string(), 5.231e-2)]);
    }

    #[test]
    fn routing() {
        let reg = ModelRegistry::builtin();
        let r = reg.route(Species::Spruce, 14).unwrap();
        assert_eq!((r.model.si, r.substituted), (14, false));
        let r = reg.route(Species::Pine, 26).unwrap();
        assert_eq!((r.model.species, r.model.si, r.substituted), (Species::Pine, 23, true));
        let r = reg.route(Species::Birch, 26).unwrap();
        assert_eq!((r.model.si, r.substituted), (23, true));
        let empty = ModelRegistry::new("none");
        assert!(matches!(empty.route(Species::Birch, 8), Err(Error::Routing(_))));
    }

    #[test]
    fn every_builtin_at_zero_predictors() {
        let reg = ModelRegistry::builtin();
        for m in reg.models() {
            let x = PredictorVector::from_pairs(m.terms.iter().map(|(n, _)| (n.as_str(), 0.0)));
            let expect = (m.intercept + m.sigma * m.sigma / 2.0).exp();
            assert_eq!(predict_age(m, &x).unwrap(), expect, "{}", m.label());
        }
    }

    #[test]
    fn round_trip_through_text() {
        let reg = ModelRegistry::builtin();
        let text = format_registry(&reg);
        let back = parse_registry(&text, Path::new("r.txt")).unwrap();
        assert_eq!(back, reg);
        assert_eq!(format_registry(&back), text);
    }

    #[test]
    fn unknown_predictor_is_rejected() {
        let text = "[model species=spruce si=14 link=log sigma=0.2]\nintercept 1.0\nterm h99_first 0.1\nterm foo 1\n";
        match parse_registry(text, Path::new("r.txt")) {
            Err(Error::UnknownPredictors(names)) => assert_eq!(names, vec!["h99_first", "foo"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_files() {
        let p = Path::new("r.txt");
        assert!(parse_registry("intercept 1\n", p).is_err());
        assert!(parse_registry("[model species=oak si=1 link=log sigma=0.1]\nintercept 1\n", p).is_err());
        assert!(parse_registry("[model species=pine si=8 link=log sigma=0.1]\n", p).is_err());
        assert!(parse_registry(
            "[model species=pine si=8 link=log sigma=0.1]\nintercept 1\n[model species=pine si=8 link=log sigma=0.1]\nintercept 2\n",
            p
        )
        .is_err());
    }
}
