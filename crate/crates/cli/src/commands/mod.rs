pub mod curves;
pub mod fit;
pub mod metrics;
pub mod predict;
pub mod synth;
pub mod validate;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use standage_core::geodata::{read_grid, write_grid};
use standage_core::models::load_registry;
use standage_core::{Grid, ModelRegistry};

use crate::config::RunConfig;
use crate::error::CliError;

/// The registry named in the config, else the built-in published models.
pub fn registry(cfg: &RunConfig) -> Result<ModelRegistry, CliError> {
    match cfg.input("registry")? {
        Some(p) => Ok(load_registry(p)?),
        None => Ok(ModelRegistry::builtin()),
    }
}

/// Every `*.asc` grid in a directory, keyed by file stem.
pub fn read_layer_dir(dir: &Path) -> Result<BTreeMap<String, Grid>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::invalid(format!("{}: {e}", dir.display())))?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::runtime(e.to_string()))?.path();
        if path.extension().is_some_and(|x| x == "asc") {
            let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            out.insert(name, read_grid(&path)?);
        }
    }
    Ok(out)
}

pub fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

pub fn write_asc(grid: &Grid, path: &Path) -> Result<(), CliError> {
    Ok(write_grid(grid, path)?)
}
