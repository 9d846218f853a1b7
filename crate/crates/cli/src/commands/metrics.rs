use std::fs;
use std::sync::Arc;

use standage_core::geodata::{
    normalize_heights, read_grid, read_points, read_polygons, slope_grid, zonal_weighted_mean, GridGeometry,
};
use standage_core::predictors::{
    als_metrics_with, assemble_predictors, format_predictor_csv, metrics_grid_with, MetricSpec, SpectralVector,
    TerrainInputs, BAND_NAMES, OUTPUT_NODATA, PREDICTION_CELLSIZE,
};
use standage_core::{Grid, PointCloud, Polygon};

use super::{write, write_asc};
use crate::config::RunConfig;
use crate::error::CliError;

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let points_path = cfg.required_input("points")?;
    let dtm_path = cfg.required_input("dtm")?;
    let plots_path = cfg.input("plots")?;
    let spectral_dir = cfg.input("spectral")?;
    let spec = MetricSpec::new(cfg.list("percentiles")?, cfg.list("cc_thresholds")?)
        .map_err(|e| CliError::invalid(format!("percentiles/cc_thresholds: {e}")))?;
    let spec = Arc::new(spec);
    let want_grids = cfg.flag("grid")?;
    let bands = match &spectral_dir {
        Some(dir) => {
            let mut out = Vec::new();
            for b in BAND_NAMES {
                let p = dir.join(format!("{b}.asc"));
                if !p.exists() {
                    return Err(CliError::invalid(format!("spectral: {} does not exist", p.display())));
                }
                out.push((b, read_grid(&p)?));
            }
            Some(out)
        }
        None => None,
    };
    let out = cfg.output_dir()?;

    let dtm = read_grid(&dtm_path)?;
    let cloud = read_points(&points_path)?;
    let (norm, tally) = normalize_heights(&cloud, &dtm)?;
    eprintln!(
        "normalized {} of {} points: {} dropped outside the DTM, {} negative heights clamped to 0",
        norm.len(),
        cloud.len(),
        tally.dropped,
        tally.clamped
    );

    let geo = dtm.geometry();
    let plots = match plots_path {
        Some(p) => read_polygons(p)?,
        None => vec![Polygon::rectangle("all", geo.xll, geo.yll, geo.xright(), geo.ytop())?],
    };
    let slope = match slope_grid(&dtm) {
        Ok(g) => Some(g),
        Err(e) => {
            log::warn!("slope unavailable: {e}");
            None
        }
    };

    let mut rows = Vec::with_capacity(plots.len());
    let mut skipped = 0;
    for plot in &plots {
        let inside: Vec<_> = norm.points.iter().filter(|p| plot.contains(p.x, p.y)).copied().collect();
        let metrics = match als_metrics_with(&PointCloud::new(inside, true), &spec) {
            Ok(m) => m,
            Err(e) => {
                log::warn!("plot {}: {e}; skipped", plot.id);
                skipped += 1;
                continue;
            }
        };
        let spectral = match &bands {
            None => None,
            Some(bs) => {
                let vals: Result<Vec<(&str, f64)>, _> =
                    bs.iter().map(|(b, g)| zonal_weighted_mean(g, plot).map(|v| (*b, v))).collect();
                match vals.and_then(SpectralVector::from_bands) {
                    Ok(s) => Some(s),
                    Err(e) => {
                        log::warn!("plot {}: spectral predictors missing: {e}", plot.id);
                        None
                    }
                }
            }
        };
        let terrain = TerrainInputs {
            dtm: zonal_weighted_mean(&dtm, plot).ok(),
            slope: slope.as_ref().and_then(|g| zonal_weighted_mean(g, plot).ok()),
            dist_c: plot.attribute_f64("distC"),
            lat: plot.attribute_f64("Lat"),
            lon: plot.attribute_f64("Lon"),
        };
        let x = assemble_predictors(&metrics, spectral.as_ref(), &terrain, plot.attribute_f64("diffT"))?;
        rows.push((plot.id.clone(), x));
    }
    if skipped > 0 {
        eprintln!("{skipped} plot(s) without first returns skipped");
    }
    write(&out.join("predictors.csv"), &format_predictor_csv(&rows))?;

    if want_grids {
        let template = if geo.cellsize == PREDICTION_CELLSIZE {
            dtm.clone()
        } else {
            let t = GridGeometry {
                ncols: ((geo.xright() - geo.xll) / PREDICTION_CELLSIZE).ceil() as usize,
                nrows: ((geo.ytop() - geo.yll) / PREDICTION_CELLSIZE).ceil() as usize,
                cellsize: PREDICTION_CELLSIZE,
                ..geo
            };
            Grid::filled(t, OUTPUT_NODATA, 0.0)?
        };
        let grids = metrics_grid_with(&norm, &template, &spec)?;
        let dir = out.join("grids");
        fs::create_dir_all(&dir).map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))?;
        for (name, g) in &grids {
            write_asc(g, &dir.join(format!("{name}.asc")))?;
        }
        eprintln!("wrote {} metric grids to {}", grids.len(), dir.display());
    }
    cfg.write_manifest("metrics", &out)
}
