//! Forest stand-age mapping toolkit.
//!
//! The crate covers the full chain from height-normalized laser returns and
//! satellite rasters to per-cell age predictions and stand-level validation:
//!
//! * [`geodata`] grids, point clouds, polygons, terrain derivatives
//! * [`predictors`] laser metrics and spectral predictors
//! * [`models`] log-linear age models per species and site index, with the
//!   published model registry built in
//! * [`fitting`] least squares, AIC stepwise selection, link comparison
//! * [`mapping`] wall-to-wall prediction and stand synthetic estimates
//! * [`evaluation`] RMSE/MD reports and synthetic test scenes

pub mod error;
pub mod evaluation;
pub mod fitting;
pub mod geodata;
pub mod mapping;
pub mod models;
pub mod predictors;

pub use error::{Error, Result};
pub use evaluation::{EvalPair, EvaluationReport, ReportRow};
pub use fitting::{FitSummary, TrainingSet};
pub use mapping::{LayerStack, StandEstimate};
pub use geodata::{Grid, PointCloud, PointRecord, Polygon, ReturnClass};

pub use models::{AgeModel, Link, ModelRegistry, SiClassSet, Species};
pub use predictors::{MetricsVector, PredictorVector, SpectralVector};
