//! Seeded fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use standage_core::evaluation::{synth_scene, SceneSpec};
use standage_core::fitting::TrainingRow;
use standage_core::{Grid, LayerStack, ModelRegistry, PointCloud, PointRecord, PredictorVector, ReturnClass, Species, TrainingSet};

/// Height-normalized cloud over an `ncells` x `ncells` grid of 16 m cells, with its template.
pub fn canopy_cloud(ncells: usize, per_cell: usize, seed: u64) -> (PointCloud, Grid) {
    let template = Grid::new(ncells, ncells, 0.0, 0.0, 16.0, -9999.0, vec![0.0; ncells * ncells])
        .expect("valid template");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extent = ncells as f64 * 16.0;
    let points = (0..ncells * ncells * per_cell)
        .map(|_| {
            let x = rng.random_range(0.0..extent);
            let y = rng.random_range(0.0..extent);
            let top = 4.0 + 24.0 * ((x / 180.0).sin() * (y / 130.0).cos()).abs();
            let z = if rng.random_bool(0.15) { 0.0 } else { rng.random_range(0.0..top) };
            let return_class = match rng.random_range(0..10) {
                0..=5 => ReturnClass::Only,
                6 | 7 => ReturnClass::First,
                8 => ReturnClass::Intermediate,
                _ => ReturnClass::Last,
            };
            PointRecord { x, y, z, return_class }
        })
        .collect();
    (PointCloud::new(points, true), template)
}

/// Layer stack of a synthetic mixed-species scene.
pub fn scene_stack(ncols: usize, nrows: usize, seed: u64) -> LayerStack {
    let spec = SceneSpec {
        ncols,
        nrows,
        seed,
        n_plots: 0,
        ..Default::default()
    };
    synth_scene(&ModelRegistry::builtin(), &spec).expect("scene").stack
}

/// Log-linear training stratum with `noise` extra candidate predictors.
pub fn training_set(n: usize, seed: u64) -> (TrainingSet, Vec<String>) {
    let names: Vec<String> = ["h95_first", "cc2", "cc5", "cc10", "NDVI", "slope"].map(String::from).to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|i| {
            let mut x = PredictorVector::new();
            for name in &names {
                x.set(name, rng.random_range(0.0..1.0));
            }
            let h = rng.random_range(5.0..30.0);
            x.set("h95_first", h);
            let e: f64 = rng.random_range(-0.3..0.3);
            TrainingRow {
                id: i.to_string(),
                age: (2.5 + 0.08 * h - 0.3 * x.get("cc5").unwrap_or(0.0) + e).exp(),
                predictors: x,
            }
        })
        .collect();
    (TrainingSet::new(Species::Spruce, 17, rows).expect("training set"), names)
}
