use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fitting::{TrainingRow, TrainingSet};
use crate::geodata::{Grid, GridGeometry};
use crate::mapping::{LayerStack, PlotInput};
use crate::models::{AgeModel, Link, ModelRegistry, Species};
use crate::predictors::{PredictorVector, H95, H95_SQUARED, OUTPUT_NODATA, PREDICTION_CELLSIZE};

/// Mid-range constants for every non-height predictor of the built-in models.
pub const DEFAULT_BASELINE: [(&str, f64); 13] = [
    ("cc2", 0.8),
    ("cc5", 0.6),
    ("cc10", 0.4),
    ("NDVI", 0.8),
    ("s2_8A", 2500.0),
    ("s2_11", 1200.0),
    ("DTM", 300.0),
    ("distC", 50_000.0),
    ("Lat", 61.0),
    ("Lon", 10.0),
    ("slope", 10.0),
    ("diffT", 0.0),
    ("h95_last", 5.0),
];

const MAX_DRAWS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub ncols: usize,
    pub nrows: usize,
    pub xll: f64,
    pub yll: f64,
    /// Relative species frequencies.
    pub species_mix: Vec<(Species, f64)>,
    /// Relative site-index frequencies.
    pub si_mix: Vec<(u8, f64)>,
    /// Uniform age range in years.
    pub age_range: (f64, f64),
    pub seed: u64,
    /// Cells sampled without replacement into the plot table.
    pub n_plots: usize,
    pub baseline: BTreeMap<String, f64>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            ncols: 100,
            nrows: 100,
            xll: 0.0,
            yll: 0.0,
            species_mix: Species::ALL.iter().map(|s| (*s, 1.0)).collect(),
            si_mix: [6, 8, 11, 14, 17, 20, 23, 26].iter().map(|s| (*s, 1.0)).collect(),
            age_range: (20.0, 120.0),
            seed: 1,
            n_plots: 500,
            baseline: DEFAULT_BASELINE.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

impl SceneSpec {
    fn validate(&self) -> Result<()> {
        if self.ncols == 0 || self.nrows == 0 {
            return Err(Error::Config("scene needs at least one cell".into()));
        }
        let (lo, hi) = self.age_range;
        if !(3.0..=287.0).contains(&lo) || !(3.0..=287.0).contains(&hi) || lo > hi {
            return Err(Error::Config(format!("age range [{lo}, {hi}] must lie within [3, 287]")));
        }
        let bad_mix = |w: &mut dyn Iterator<Item = f64>| {
            let w: Vec<f64> = w.collect();
            w.is_empty() || w.iter().any(|x| !(*x >= 0.0)) || w.iter().sum::<f64>() <= 0.0
        };
        if bad_mix(&mut self.species_mix.iter().map(|(_, w)| *w)) || bad_mix(&mut self.si_mix.iter().map(|(_, w)| *w)) {
            return Err(Error::Config("species and SI mixes need non-negative weights with a positive sum".into()));
        }
        Ok(())
    }
}

/// A sampled cell with its predictors, routing inputs and ages.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenePlot {
    pub id: String,
    pub cell: usize,
    pub species: Species,
    pub si: u8,
    pub true_age: f64,
    /// True age perturbed by the model's residual noise on the link scale.
    pub observed_age: f64,
    pub predictors: PredictorVector,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub stack: LayerStack,
    /// Noise-free generating age per cell.
    pub truth: Grid,
    /// Truth perturbed by residual noise, per cell.
    pub observed: Grid,
    pub plots: Vec<ScenePlot>,
    /// Draws rejected because the age was outside a model's attainable range.
    pub redraws: usize,
    pub manifest: String,
}

impl Scene {
    /// Plots of one stratum as a training set with observed ages.
    pub fn training_set(&self, species: Species, si: u8) -> Result<TrainingSet> {
        let rows = self
            .plots
            .iter()
            .filter(|p| p.species == species && p.si == si)
            .map(|p| TrainingRow {
                id: p.id.clone(),
                age: p.observed_age,
                predictors: p.predictors.clone(),
            })
            .collect();
        TrainingSet::new(species, si, rows)
    }

    pub fn plot_inputs(&self) -> Vec<PlotInput> {
        self.plots
            .iter()
            .map(|p| PlotInput {
                id: p.id.clone(),
                predictors: p.predictors.clone(),
                species: p.species,
                mapped_species: Some(p.species),
                si: Some(p.si),
                psi: Some(p.si as f64),
            })
            .collect()
    }
}

/// Coefficients of the model's linear predictor as a quadratic in `h95_first`
/// with every other predictor held at its baseline.
fn quadratic(model: &AgeModel, base: &PredictorVector) -> Result<(f64, f64, f64)> {
    let (mut c, mut a1, mut a2) = (model.intercept, 0.0, 0.0);
    let is_h = |s: &str| s == H95;
    for (name, beta) in &model.terms {
        let parts: Option<(&str, &str)> = name.split_once(':');
        match (name.as_str(), parts) {
            (H95, _) => a1 += beta,
            (H95_SQUARED, _) => a2 += beta,
            (n, _) if n.strip_suffix("^2").is_some_and(is_h) => a2 += beta,
            (_, Some((x, y))) if is_h(x) && is_h(y) => a2 += beta,
            (_, Some((x, y))) if is_h(x) || is_h(y) => {
                let other = if is_h(x) { y } else { x };
                a1 += beta * baseline_term(base, other, model)?;
            }
            (n, _) => c += beta * baseline_term(base, n, model)?,
        }
    }
    Ok((c, a1, a2))
}

fn baseline_term(base: &PredictorVector, name: &str, model: &AgeModel) -> Result<f64> {
    base.term(name)
        .map_err(|_| Error::Config(format!("scene baseline lacks `{name}` used by {}", model.label())))
}

/// `h95_first` giving linear predictor `eta`, on the ascending branch of the quadratic.
fn invert(eta: f64, (c, a1, a2): (f64, f64, f64)) -> Option<f64> {
    let h = if a2 == 0.0 {
        if a1 == 0.0 {
            return None;
        }
        (eta - c) / a1
    } else {
        let k = c - eta;
        let disc = a1 * a1 - 4.0 * a2 * k;
        if disc < 0.0 {
            return None;
        }
        let s = disc.sqrt();
        if a1 > 0.0 {
            -2.0 * k / (a1 + s)
        } else {
            (-a1 + s) / (2.0 * a2)
        }
    };
    (h.is_finite() && h >= 0.0).then_some(h)
}

fn inverse_link(link: Link, v: f64) -> f64 {
    match link {
        Link::Log => v.exp(),
        Link::Sqrt => v.max(0.0).powi(2),
        Link::Identity => v,
    }
}

/// Random scene whose height layer inverts the routed model at each cell's drawn age.
pub fn synth_scene(registry: &ModelRegistry, spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let geo = GridGeometry {
        ncols: spec.ncols,
        nrows: spec.nrows,
        xll: spec.xll,
        yll: spec.yll,
        cellsize: PREDICTION_CELLSIZE,
    };
    let base = PredictorVector::from_pairs(spec.baseline.iter().map(|(k, v)| (k.as_str(), *v)));
    let mut quads: BTreeMap<(Species, u8), (f64, f64, f64)> = BTreeMap::new();
    for m in registry.models() {
        quads.insert((m.species, m.si), quadratic(m, &base)?);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let species_pick = WeightedIndex::new(spec.species_mix.iter().map(|(_, w)| *w))
        .map_err(|e| Error::Config(format!("species mix: {e}")))?;
    let si_pick = WeightedIndex::new(spec.si_mix.iter().map(|(_, w)| *w))
        .map_err(|e| Error::Config(format!("SI mix: {e}")))?;
    let (lo, hi) = spec.age_range;

    let n = geo.len();
    let mut species = vec![0.0; n];
    let mut psi = vec![0.0; n];
    let mut h95 = vec![0.0; n];
    let mut truth = vec![0.0; n];
    let mut observed = vec![0.0; n];
    let mut cell_si = vec![0u8; n];
    let mut redraws = 0;

    for i in 0..n {
        let mut draws = 0;
        loop {
            draws += 1;
            if draws > MAX_DRAWS {
                return Err(Error::Config(format!(
                    "no attainable age after {MAX_DRAWS} draws; narrow the age range or the SI mix"
                )));
            }
            let sp = spec.species_mix[species_pick.sample(&mut rng)].0;
            let si = spec.si_mix[si_pick.sample(&mut rng)].0;
            let age = if lo == hi { lo } else { rng.random_range(lo..=hi) };
            let noise: f64 = rng.sample(rand_distr::StandardNormal);
            let model = registry.route(sp, si)?.model;
            let eta = model.link.apply(age);
            let Some(h) = invert(eta, quads[&(model.species, model.si)]) else {
                redraws += 1;
                continue;
            };
            let shift = model.sigma * noise;
            let obs = if shift == 0.0 { age } else { inverse_link(model.link, eta + shift) };
            if !(obs > 0.0) {
                redraws += 1;
                continue;
            }
            species[i] = sp.code() as f64;
            psi[i] = si as f64;
            h95[i] = h;
            truth[i] = age;
            observed[i] = obs;
            cell_si[i] = si;
            break;
        }
    }

    let mut layers = BTreeMap::new();
    for (name, v) in &spec.baseline {
        layers.insert(name.clone(), Grid::filled(geo, OUTPUT_NODATA, *v)?);
    }
    layers.insert(H95.to_string(), Grid::from_geometry(geo, OUTPUT_NODATA, h95)?);
    let stack = LayerStack::new(
        layers,
        Grid::from_geometry(geo, OUTPUT_NODATA, species)?,
        Grid::from_geometry(geo, OUTPUT_NODATA, psi)?,
        None,
    )?;

    let mut cells: Vec<usize> = rand::seq::index::sample(&mut rng, n, spec.n_plots.min(n)).into_vec();
    cells.sort_unstable();
    let plots = cells
        .into_iter()
        .map(|i| ScenePlot {
            id: format!("plot{i}"),
            cell: i,
            species: Species::from_code(stack.species().values()[i]).expect("generated code"),
            si: cell_si[i],
            true_age: truth[i],
            observed_age: observed[i],
            predictors: stack.cell_vector(i),
        })
        .collect();

    let manifest = scene_manifest(spec, registry, redraws);
    Ok(Scene {
        stack,
        truth: Grid::from_geometry(geo, OUTPUT_NODATA, truth)?,
        observed: Grid::from_geometry(geo, OUTPUT_NODATA, observed)?,
        plots,
        redraws,
        manifest,
    })
}

fn scene_manifest(spec: &SceneSpec, registry: &ModelRegistry, redraws: usize) -> String {
    let join = |it: Vec<String>| it.join(",");
    let mut out = String::new();
    let _ = writeln!(out, "seed={}", spec.seed);
    let _ = writeln!(out, "ncols={}", spec.ncols);
    let _ = writeln!(out, "nrows={}", spec.nrows);
    let _ = writeln!(out, "xll={}", spec.xll);
    let _ = writeln!(out, "yll={}", spec.yll);
    let _ = writeln!(out, "cellsize={PREDICTION_CELLSIZE}");
    let _ = writeln!(
        out,
        "species_mix={}",
        join(spec.species_mix.iter().map(|(s, w)| format!("{s}:{w}")).collect())
    );
    let _ = writeln!(out, "si_mix={}", join(spec.si_mix.iter().map(|(s, w)| format!("{s}:{w}")).collect()));
    let _ = writeln!(out, "age_min={}", spec.age_range.0);
    let _ = writeln!(out, "age_max={}", spec.age_range.1);
    let _ = writeln!(out, "n_plots={}", spec.n_plots);
    for (k, v) in &spec.baseline {
        let _ = writeln!(out, "baseline.{k}={v}");
    }
    let _ = writeln!(out, "registry={}", registry.provenance);
    let _ = writeln!(out, "redraws={redraws}");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::predict_map;

    fn small(seed: u64) -> SceneSpec {
        SceneSpec {
            ncols: 20,
            nrows: 15,
            seed,
            n_plots: 50,
            ..Default::default()
        }
    }

    #[test]
    fn zero_sigma_inverts_exactly() {
        let mut reg = ModelRegistry::builtin();
        for m in reg.models_mut() {
            m.sigma = 0.0;
        }
        let scene = synth_scene(&reg, &small(3)).unwrap();
        let map = predict_map(&scene.stack, &reg).unwrap();
        assert_eq!(map.tally.predicted, 300);
        for (p, t) in map.ages.values().iter().zip(scene.truth.values()) {
            assert!((p - t).abs() <= 1e-6 * t, "{p} vs {t}");
        }
        assert_eq!(scene.observed.values(), scene.truth.values());
    }

    #[test]
    fn same_seed_same_scene() {
        let reg = ModelRegistry::builtin();
        let a = synth_scene(&reg, &small(9)).unwrap();
        let b = synth_scene(&reg, &small(9)).unwrap();
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.observed, b.observed);
        assert_eq!(a.stack.layers(), b.stack.layers());
        assert_eq!(a.plots, b.plots);
        assert_eq!(a.manifest, b.manifest);
        let c = synth_scene(&reg, &small(10)).unwrap();
        assert_ne!(a.truth, c.truth);
    }

    #[test]
    fn degenerate_species_mix() {
        let spec = SceneSpec {
            species_mix: vec![(Species::Spruce, 1.0)],
            ..small(4)
        };
        let scene = synth_scene(&ModelRegistry::builtin(), &spec).unwrap();
        assert!(scene.stack.species().values().iter().all(|v| *v == 1.0));
        assert!(scene.manifest.contains("species_mix=spruce:1\n"));
    }

    #[test]
    fn quadratic_roots_stay_ascending() {
        // eta = 1 + 0.2 h - 0.004 h^2, vertex at h = 25
        let q = (1.0, 0.2, -0.004);
        let h = invert(3.0, q).unwrap();
        assert!(h < 25.0);
        assert!((1.0 + 0.2 * h - 0.004 * h * h - 3.0).abs() < 1e-12);
        assert_eq!(invert(4.0, q), None);
        assert_eq!(invert(2.0, (1.0, 0.5, 0.0)), Some(2.0));
        assert_eq!(invert(0.0, (1.0, 0.5, 0.0)), None);
    }

    #[test]
    fn invalid_specs() {
        let reg = ModelRegistry::builtin();
        let bad = SceneSpec {
            age_range: (1.0, 50.0),
            ..small(1)
        };
        assert!(synth_scene(&reg, &bad).is_err());
        let mut missing = small(1);
        missing.baseline.remove("Lat");
        assert!(matches!(synth_scene(&reg, &missing), Err(Error::Config(_))));
    }

    #[test]
    fn training_set_uses_observed_ages() {
        let spec = SceneSpec {
            species_mix: vec![(Species::Pine, 1.0)],
            si_mix: vec![(14, 1.0)],
            ..small(5)
        };
        let scene = synth_scene(&ModelRegistry::builtin(), &spec).unwrap();
        let ts = scene.training_set(Species::Pine, 14).unwrap();
        assert_eq!(ts.len(), 50);
        assert_eq!(ts.rows[0].age, scene.plots[0].observed_age);
        assert_eq!(scene.plot_inputs().len(), 50);
    }
}
