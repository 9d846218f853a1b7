//! Wall-to-wall age prediction and stand-level synthetic estimates.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geodata::{cells_in_polygon, Grid, GridGeometry, Polygon};
use crate::models::{predict_age, snap_si, AgeModel, ModelRegistry, SiClassSet, Species};
use crate::predictors::{PredictorVector, H95, H95_SQUARED, OUTPUT_NODATA};

/// Predictor rasters plus the species and pSI grids that route each cell.
#[derive(Debug, Clone)]
pub struct LayerStack {
    predictors: BTreeMap<String, Grid>,
    species: Grid,
    psi: Grid,
    mask: Option<Grid>,
}

impl LayerStack {
    pub fn new(
        predictors: BTreeMap<String, Grid>,
        species: Grid,
        psi: Grid,
        mask: Option<Grid>,
    ) -> Result<Self> {
        let geo = species.geometry();
        let check = |what: &str, g: &Grid| {
            if g.same_geometry(&species) {
                Ok(())
            } else {
                Err(Error::Stack(format!(
                    "{what} grid geometry {:?} differs from the species grid {:?}",
                    g.geometry(),
                    geo
                )))
            }
        };
        check("pSI", &psi)?;
        if let Some(m) = &mask {
            check("mask", m)?;
        }
        for (name, g) in &predictors {
            check(name, g)?;
        }
        for (i, v) in species.values().iter().enumerate() {
            if !species.is_nodata(*v) && Species::from_code(*v).is_none() {
                return Err(Error::Stack(format!("species code {v} at cell {i} is not 1, 2, 3 or nodata")));
            }
        }
        Ok(Self {
            predictors,
            species,
            psi,
            mask,
        })
    }

    /// The same stack routed by a different pSI grid.
    pub fn with_psi(self, psi: Grid) -> Result<Self> {
        Self::new(self.predictors, self.species, psi, self.mask)
    }

    pub fn geometry(&self) -> GridGeometry {
        self.species.geometry()
    }

    pub fn species(&self) -> &Grid {
        &self.species
    }

    pub fn psi(&self) -> &Grid {
        &self.psi
    }

    pub fn mask(&self) -> Option<&Grid> {
        self.mask.as_ref()
    }

    pub fn layer(&self, name: &str) -> Option<&Grid> {
        self.predictors.get(name)
    }

    pub fn layers(&self) -> &BTreeMap<String, Grid> {
        &self.predictors
    }

    fn is_masked(&self, i: usize) -> bool {
        if let Some(m) = &self.mask {
            let v = m.values()[i];
            if m.is_nodata(v) || v == 0.0 {
                return true;
            }
        }
        self.species.is_nodata(self.species.values()[i]) || self.psi.is_nodata(self.psi.values()[i])
    }

    /// Every stack layer at cell `i` as a predictor vector; nodata becomes missing.
    pub fn cell_vector(&self, i: usize) -> PredictorVector {
        let mut v = PredictorVector::new();
        for (name, g) in &self.predictors {
            let x = g.values()[i];
            if g.is_nodata(x) {
                v.set_missing(name);
            } else {
                v.set(name, x);
            }
        }
        if let Some(g) = self.predictors.get(H95_SQUARED) {
            // an explicit square layer wins over the derived one
            let x = g.values()[i];
            if g.is_nodata(x) {
                v.set_missing(H95_SQUARED);
            } else {
                v.set(H95_SQUARED, x);
            }
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellStatus {
    Predicted,
    /// Predicted with a neighbouring site-index model.
    Substituted,
    Masked,
    MissingPredictor,
    /// The model's back-transformed age overflowed; the cell stays nodata.
    NonFinite,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MapTally {
    pub total: usize,
    pub predicted: usize,
    pub masked: usize,
    pub missing_predictor: usize,
    pub non_finite: usize,
    /// Predicted cells routed to a substitute site index (a subset of `predicted`).
    pub si_substituted: usize,
}

impl MapTally {
    fn add(mut self, o: Self) -> Self {
        self.total += o.total;
        self.predicted += o.predicted;
        self.masked += o.masked;
        self.missing_predictor += o.missing_predictor;
        self.non_finite += o.non_finite;
        self.si_substituted += o.si_substituted;
        self
    }

    fn count(&mut self, s: CellStatus) {
        self.total += 1;
        match s {
            CellStatus::Predicted => self.predicted += 1,
            CellStatus::Substituted => {
                self.predicted += 1;
                self.si_substituted += 1;
            }
            CellStatus::Masked => self.masked += 1,
            CellStatus::MissingPredictor => self.missing_predictor += 1,
            CellStatus::NonFinite => self.non_finite += 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PredictionMap {
    pub ages: Grid,
    pub status: Vec<CellStatus>,
    pub tally: MapTally,
}

/// A model term as a product of stack layers.
struct CompiledModel<'a> {
    model: &'a AgeModel,
    terms: Option<Vec<(f64, Vec<&'a Grid>)>>,
}

fn term_layers<'a>(stack: &'a LayerStack, term: &str) -> Option<Vec<&'a Grid>> {
    if let Some(g) = stack.layer(term) {
        return Some(vec![g]);
    }
    if let Some((a, b)) = term.split_once(':') {
        let mut out = term_layers(stack, a)?;
        out.extend(term_layers(stack, b)?);
        return Some(out);
    }
    if let Some(base) = term.strip_suffix("^2") {
        let g = stack.layer(base)?;
        return Some(vec![g, g]);
    }
    if term == H95_SQUARED {
        let g = stack.layer(H95)?;
        return Some(vec![g, g]);
    }
    None
}

fn compile<'a>(model: &'a AgeModel, stack: &'a LayerStack) -> CompiledModel<'a> {
    let terms: Option<Vec<_>> = model
        .terms
        .iter()
        .map(|(name, beta)| term_layers(stack, name).map(|ls| (*beta, ls)))
        .collect();
    if terms.is_none() {
        log::debug!("{} needs a predictor the layer stack lacks; its cells stay nodata", model.label());
    }
    CompiledModel { model, terms }
}

impl CompiledModel<'_> {
    fn predict(&self, i: usize) -> Option<f64> {
        let terms = self.terms.as_ref()?;
        let mut eta = self.model.intercept;
        for (beta, layers) in terms {
            let mut v = 1.0;
            for (k, g) in layers.iter().enumerate() {
                let x = g.values()[i];
                if g.is_nodata(x) {
                    return None;
                }
                v = if k == 0 { x } else { v * x };
            }
            eta += beta * v;
        }
        Some(self.model.link.back_transform(eta, self.model.sigma))
    }
}

/// Age in years for every cell, routed by the cell's species and snapped pSI.
pub fn predict_map(stack: &LayerStack, registry: &ModelRegistry) -> Result<PredictionMap> {
    let geo = stack.geometry();
    let levels = SiClassSet::standard();
    let compiled: BTreeMap<(Species, u8), CompiledModel> = registry
        .models()
        .map(|m| ((m.species, m.si), compile(m, stack)))
        .collect();

    let ncells = geo.len();
    let mut ages = vec![OUTPUT_NODATA; ncells];
    let mut status = vec![CellStatus::Masked; ncells];
    let band = geo.ncols.max(1) * 16;
    let tally = ages
        .par_chunks_mut(band)
        .zip(status.par_chunks_mut(band))
        .enumerate()
        .map(|(b, (out, st))| {
            let mut t = MapTally::default();
            for (j, (age, s)) in out.iter_mut().zip(st.iter_mut()).enumerate() {
                let i = b * band + j;
                *s = classify(stack, registry, &compiled, &levels, i, age);
                t.count(*s);
            }
            t
        })
        .reduce(MapTally::default, MapTally::add);

    Ok(PredictionMap {
        ages: Grid::from_geometry(geo, OUTPUT_NODATA, ages)?,
        status,
        tally,
    })
}

fn classify(
    stack: &LayerStack,
    registry: &ModelRegistry,
    compiled: &BTreeMap<(Species, u8), CompiledModel>,
    levels: &SiClassSet,
    i: usize,
    age: &mut f64,
) -> CellStatus {
    if stack.is_masked(i) {
        return CellStatus::Masked;
    }
    let species = Species::from_code(stack.species.values()[i]).expect("validated species code");
    let Ok(si) = snap_si(stack.psi.values()[i], levels) else {
        return CellStatus::Masked;
    };
    let Ok(routed) = registry.route(species, si) else {
        return CellStatus::MissingPredictor;
    };
    let m = routed.model;
    match compiled[&(m.species, m.si)].predict(i) {
        Some(a) if !a.is_finite() => CellStatus::NonFinite,
        Some(a) => {
            *age = a;
            if routed.substituted {
                CellStatus::Substituted
            } else {
                CellStatus::Predicted
            }
        }
        None => CellStatus::MissingPredictor,
    }
}

/// Mean predicted age of one stand.
#[derive(Debug, Clone, PartialEq)]
pub struct StandEstimate {
    pub stand_id: String,
    /// `None` when no valid cell centre falls inside the stand.
    pub mean_age: Option<f64>,
    pub cells: usize,
    pub area_ha: f64,
    pub si_substituted: usize,
    pub missing_predictor: usize,
}

impl StandEstimate {
    pub fn flags(&self) -> String {
        let mut f = Vec::new();
        if self.mean_age.is_none() {
            f.push("no_estimate".to_string());
        }
        if self.si_substituted > 0 {
            f.push(format!("si_substituted={}", self.si_substituted));
        }
        if self.missing_predictor > 0 {
            f.push(format!("missing_predictor={}", self.missing_predictor));
        }
        f.join(";")
    }
}

/// Unweighted mean of the valid cells whose centres fall inside each stand.
pub fn stand_estimates(age_map: &Grid, stands: &[Polygon]) -> Vec<StandEstimate> {
    estimates(age_map, None, stands)
}

/// As [`stand_estimates`], also tallying the routing status of member cells.
pub fn stand_estimates_routed(map: &PredictionMap, stands: &[Polygon]) -> Vec<StandEstimate> {
    estimates(&map.ages, Some(&map.status), stands)
}

fn estimates(age_map: &Grid, status: Option<&[CellStatus]>, stands: &[Polygon]) -> Vec<StandEstimate> {
    stands
        .par_iter()
        .map(|poly| {
            let mut sum = 0.0;
            let mut cells = 0;
            let (mut sub, mut miss) = (0, 0);
            for i in cells_in_polygon(age_map, poly) {
                match status.map(|s| s[i]) {
                    Some(CellStatus::Substituted) => sub += 1,
                    Some(CellStatus::MissingPredictor) => miss += 1,
                    _ => {}
                }
                let v = age_map.values()[i];
                if !age_map.is_nodata(v) {
                    sum += v;
                    cells += 1;
                }
            }
            StandEstimate {
                stand_id: poly.id.clone(),
                mean_age: (cells > 0).then(|| sum / cells as f64),
                cells,
                area_ha: poly.area() / 10_000.0,
                si_substituted: sub,
                missing_predictor: miss,
            }
        })
        .collect()
}

/// CSV `stand_id,mean_age,cells,area_ha,flags`; a stand without estimate has an empty age.
pub fn format_stand_csv(estimates: &[StandEstimate]) -> String {
    let mut out = String::from("stand_id,mean_age,cells,area_ha,flags\n");
    for e in estimates {
        let age = e.mean_age.map(|a| a.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{age},{},{},{}", e.stand_id, e.cells, e.area_ha, e.flags());
    }
    out
}

/// Which species and site index drive model routing for a plot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotRouting {
    /// Observed species, observed SI.
    ObservedSI,
    /// Observed species, predicted SI.
    PredictedSI,
    /// Observed species, observed SI; the reference for species experiments.
    ObservedSpecies,
    /// Mapped species, observed SI.
    PredictedSpecies,
    /// Mapped species and predicted SI, as on the map.
    Mapped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotInput {
    pub id: String,
    pub predictors: PredictorVector,
    pub species: Species,
    pub mapped_species: Option<Species>,
    pub si: Option<u8>,
    pub psi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotPrediction {
    pub id: String,
    pub predicted: f64,
    pub model_species: Species,
    pub model_si: u8,
    pub substituted: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotTally {
    /// Plot ids skipped for a missing predictor, species or site index.
    pub skipped: Vec<(String, String)>,
    pub si_substituted: usize,
}

/// Predict every plot with the model chosen by `routing`; unusable plots are skipped and tallied.
pub fn apply_to_plots(
    plots: &[PlotInput],
    registry: &ModelRegistry,
    routing: PlotRouting,
) -> (Vec<PlotPrediction>, PlotTally) {
    let levels = SiClassSet::standard();
    let mut out = Vec::with_capacity(plots.len());
    let mut tally = PlotTally::default();
    for p in plots {
        let species = match routing {
            PlotRouting::PredictedSpecies | PlotRouting::Mapped => p.mapped_species,
            _ => Some(p.species),
        };
        let si = match routing {
            PlotRouting::PredictedSI | PlotRouting::Mapped => p.psi.and_then(|v| snap_si(v, &levels).ok()),
            _ => p.si,
        };
        let (Some(species), Some(si)) = (species, si) else {
            tally.skipped.push((p.id.clone(), "no species or site index for this routing".into()));
            continue;
        };
        let routed = match registry.route(species, si) {
            Ok(r) => r,
            Err(e) => {
                tally.skipped.push((p.id.clone(), e.to_string()));
                continue;
            }
        };
        match predict_age(routed.model, &p.predictors) {
            Ok(predicted) if !predicted.is_finite() => tally
                .skipped
                .push((p.id.clone(), format!("{} prediction overflowed", routed.model.label()))),
            Ok(predicted) => {
                tally.si_substituted += routed.substituted as usize;
                out.push(PlotPrediction {
                    id: p.id.clone(),
                    predicted,
                    model_species: routed.model.species,
                    model_si: routed.model.si,
                    substituted: routed.substituted,
                });
            }
            Err(e) => tally.skipped.push((p.id.clone(), e.to_string())),
        }
    }
    (out, tally)
}
