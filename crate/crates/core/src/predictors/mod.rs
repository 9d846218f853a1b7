//! Laser metrics, spectral predictors and named predictor vectors.

mod grid;
mod metrics;
mod spectral;
mod vector;

pub use grid::{
    export_columns, format_predictor_csv, metrics_grid, metrics_grid_with, EXPORT_LEAD, OUTPUT_NODATA,
    PREDICTION_CELLSIZE,
};
pub use metrics::{
    als_metrics, als_metrics_with, percentile, MetricSpec, MetricsVector, DENSITY_SLICES, FIRST_ABOVE_HEIGHT,
    RETURN_SETS,
};
pub use spectral::{ndvi, SpectralVector, BAND_NAMES};
pub use vector::{
    assemble_predictors, is_known_term, known_predictor_names, PredictorVector, TermIssue, TerrainInputs, DIFF_T,
    H95, H95_SQUARED, NDVI, TERRAIN_NAMES,
};
