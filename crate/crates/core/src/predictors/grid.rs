use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geodata::Grid;
use crate::geodata::PointCloud;
use crate::predictors::metrics::{metrics_from_heights, MetricSpec, MetricsVector};
use crate::predictors::vector::PredictorVector;

/// Cell size of the prediction raster in meters.
pub const PREDICTION_CELLSIZE: f64 = 16.0;

pub const OUTPUT_NODATA: f64 = -9999.0;

/// Per-cell metric rasters on the template's geometry.
///
/// Points outside the template are ignored. Cells without first returns are
/// nodata in every layer.
pub fn metrics_grid(cloud: &PointCloud, template: &Grid) -> Result<BTreeMap<String, Grid>> {
    metrics_grid_with(cloud, template, &MetricSpec::default_spec())
}

pub fn metrics_grid_with(
    cloud: &PointCloud,
    template: &Grid,
    spec: &Arc<MetricSpec>,
) -> Result<BTreeMap<String, Grid>> {
    if !cloud.normalized {
        return Err(Error::State("metrics need a height-normalized point cloud".into()));
    }
    if template.cellsize() != PREDICTION_CELLSIZE {
        return Err(Error::Config(format!(
            "metric rasters use {PREDICTION_CELLSIZE} m cells, template has {}",
            template.cellsize()
        )));
    }
    let geo = template.geometry();
    let ncells = geo.len();

    // counting sort of point indices by cell
    let cell_of: Vec<Option<usize>> = cloud
        .points
        .iter()
        .map(|p| geo.cell_of(p.x, p.y).map(|(r, c)| r * geo.ncols + c))
        .collect();
    let mut start = vec![0usize; ncells + 1];
    for cell in cell_of.iter().flatten() {
        start[cell + 1] += 1;
    }
    for i in 0..ncells {
        start[i + 1] += start[i];
    }
    let mut order = vec![0usize; start[ncells]];
    let mut next = start.clone();
    for (i, cell) in cell_of.iter().enumerate() {
        if let Some(cell) = cell {
            order[next[*cell]] = i;
            next[*cell] += 1;
        }
    }

    let occupied: Vec<usize> = (0..ncells).filter(|c| start[c + 1] > start[*c]).collect();
    let per_cell: Vec<(usize, MetricsVector)> = occupied
        .par_iter()
        .filter_map(|&cell| {
            let mut first = Vec::new();
            let mut last = Vec::new();
            for &i in &order[start[cell]..start[cell + 1]] {
                let p = &cloud.points[i];
                if p.return_class.is_first() {
                    first.push(p.z);
                }
                if p.return_class.is_last() {
                    last.push(p.z);
                }
            }
            (!first.is_empty()).then(|| (cell, metrics_from_heights(first, last, spec)))
        })
        .collect();

    let mut layers: Vec<Vec<f64>> = vec![vec![OUTPUT_NODATA; ncells]; spec.names().len()];
    for (cell, m) in &per_cell {
        for (layer, v) in layers.iter_mut().zip(m.values()) {
            layer[*cell] = v.unwrap_or(OUTPUT_NODATA);
        }
    }
    spec.names()
        .iter()
        .zip(layers)
        .map(|(name, values)| Ok((name.clone(), Grid::from_geometry(geo, OUTPUT_NODATA, values)?)))
        .collect()
}

/// Leading columns of the plot predictor CSV, in model-table order.
pub const EXPORT_LEAD: [&str; 14] = [
    "h95_first",
    "h95_first2",
    "cc2",
    "cc5",
    "cc10",
    "NDVI",
    "s2_8A",
    "s2_11",
    "DTM",
    "distC",
    "Lat",
    "Lon",
    "slope",
    "diffT",
];

/// Column order for the plot predictor CSV: the model-table names first,
/// then every remaining predictor in vector order.
pub fn export_columns(rows: &[(String, PredictorVector)]) -> Vec<String> {
    let mut cols: Vec<String> = EXPORT_LEAD.iter().map(|s| s.to_string()).collect();
    for (_, v) in rows {
        for (name, _) in v.iter() {
            if !cols.iter().any(|c| c == name) {
                cols.push(name.to_string());
            }
        }
    }
    for name in MetricSpec::default_spec().names() {
        if !cols.contains(name) {
            cols.push(name.clone());
        }
    }
    cols
}

/// Plot predictor table as CSV with an `id` column; missing values are empty.
pub fn format_predictor_csv(rows: &[(String, PredictorVector)]) -> String {
    let cols = export_columns(rows);
    let mut out = String::from("id");
    for c in &cols {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (id, v) in rows {
        out.push_str(&csv_field(id));
        for c in &cols {
            out.push(',');
            if let Some(x) = v.get(c) {
                let _ = write!(out, "{x}");
            }
        }
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodata::{PointRecord, ReturnClass};
    use crate::predictors::als_metrics;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn template(ncols: usize, nrows: usize) -> Grid {
        Grid::new(ncols, nrows, 0.0, 0.0, 16.0, -9999.0, vec![0.0; ncols * nrows]).unwrap()
    }

    fn random_cloud(seed: u64, n: usize, extent: f64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let classes = [ReturnClass::First, ReturnClass::Only, ReturnClass::Last, ReturnClass::Intermediate];
        let points = (0..n)
            .map(|_| PointRecord {
                x: rng.random_range(0.0..extent),
                y: rng.random_range(0.0..extent),
                z: rng.random_range(0.0..30.0),
                return_class: classes[rng.random_range(0..4)],
            })
            .collect();
        PointCloud::new(points, true)
    }

    #[test]
    fn single_cell_matches_whole_cloud() {
        let mut cloud = random_cloud(1, 300, 16.0);
        for p in &mut cloud.points {
            p.x = p.x.min(15.9);
            p.y = p.y.min(15.9) + 16.0;
        }
        let grids = metrics_grid(&cloud, &template(2, 2)).unwrap();
        let whole = als_metrics(&cloud).unwrap();
        for (name, v) in whole.iter() {
            let g = &grids[name];
            assert_eq!(g.get(0, 0), v.unwrap_or(-9999.0), "{name}");
            assert_eq!(g.get(0, 1), -9999.0);
            assert_eq!(g.get(1, 0), -9999.0);
        }
    }

    #[test]
    fn partition_oracle() {
        let cloud = random_cloud(2, 5000, 64.0);
        let t = template(4, 4);
        let grids = metrics_grid(&cloud, &t).unwrap();
        let geo = t.geometry();
        for r in 0..4 {
            for c in 0..4 {
                let sub: Vec<PointRecord> = cloud
                    .points
                    .iter()
                    .filter(|p| geo.cell_of(p.x, p.y) == Some((r, c)))
                    .copied()
                    .collect();
                let m = als_metrics(&PointCloud::new(sub, true)).unwrap();
                for (name, v) in m.iter() {
                    assert_eq!(grids[name].get(r, c), v.unwrap_or(-9999.0), "{name} ({r},{c})");
                }
            }
        }
    }

    #[test]
    fn translation_shifts_columns() {
        let mut cloud = random_cloud(3, 2000, 48.0);
        for p in &mut cloud.points {
            p.x = p.x.floor();
            p.y = p.y.floor();
        }
        let t = template(4, 3);
        let a = metrics_grid(&cloud, &t).unwrap();
        let b = metrics_grid(&cloud.translated(16.0, 0.0), &t).unwrap();
        for name in ["h95_first", "cc2", "hmean_last", "d3"] {
            for r in 0..3 {
                for c in 0..3 {
                    assert_eq!(a[name].get(r, c), b[name].get(r, c + 1), "{name}");
                }
                assert_eq!(b[name].get(r, 0), -9999.0);
            }
        }
    }

    #[test]
    fn union_of_disjoint_clouds() {
        let a = random_cloud(4, 800, 32.0);
        let b = random_cloud(5, 800, 32.0).translated(32.0, 0.0);
        let t = template(4, 2);
        let ga = metrics_grid(&a, &t).unwrap();
        let gb = metrics_grid(&b, &t).unwrap();
        let mut all = a.points.clone();
        all.extend(b.points.iter().copied());
        let gu = metrics_grid(&PointCloud::new(all, true), &t).unwrap();
        for (name, g) in &gu {
            for (i, v) in g.values().iter().enumerate() {
                let col = i % 4;
                let expect = if col < 2 { ga[name].values()[i] } else { gb[name].values()[i] };
                assert_eq!(*v, expect, "{name}");
            }
        }
    }

    #[test]
    fn template_must_be_prediction_cellsize() {
        let cloud = random_cloud(6, 10, 10.0);
        let t = Grid::new(1, 1, 0.0, 0.0, 10.0, -9999.0, vec![0.0]).unwrap();
        assert!(metrics_grid(&cloud, &t).is_err());
    }

    #[test]
    fn csv_export_header_order() {
        let mut v = PredictorVector::new();
        v.set("h95_first", 12.0);
        v.set("cc2", 0.5);
        v.set_missing("DTM");
        let csv = format_predictor_csv(&[("p,1".into(), v)]);
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("id,h95_first,h95_first2,cc2,cc5,cc10,NDVI,s2_8A,s2_11,DTM,distC,Lat,Lon,slope,diffT,"));
        assert!(header.contains(",hkurt_last,"));
        let row = lines.next().unwrap();
        assert!(row.starts_with("\"p,1\",12,144,0.5,,,,,,,"));
    }
}
