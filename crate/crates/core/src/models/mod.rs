//! Age models, the built-in published registry, prediction and routing.

pub mod builtin;
mod model;
mod registry;

pub use model::{predict_age, response_curve, snap_si, AgeModel, Link, SiClassSet, Species};
pub use registry::{
    format_registry, load_registry, parse_registry, route_model, save_registry, ModelRegistry, Routed,
    BUILTIN_PROVENANCE,
};
