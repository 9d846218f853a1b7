use standage_core::geodata::{read_grid, read_polygons};
use standage_core::mapping::{format_stand_csv, predict_map, stand_estimates_routed};
use standage_core::LayerStack;

use super::{read_layer_dir, registry, write, write_asc};
use crate::config::RunConfig;
use crate::error::CliError;

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let layers_dir = cfg.required_input("layers")?;
    let species_path = cfg.required_input("species")?;
    let psi_path = cfg.required_input("psi")?;
    let mask_path = cfg.input("mask")?;
    let stands_path = cfg.input("stands")?;
    let registry = registry(cfg)?;
    let out = cfg.output_dir()?;

    let layers = read_layer_dir(&layers_dir)?;
    let mask = mask_path.map(read_grid).transpose()?;
    let stack = LayerStack::new(layers, read_grid(species_path)?, read_grid(psi_path)?, mask)?;
    let map = predict_map(&stack, &registry)?;
    let t = map.tally;
    eprintln!(
        "cells: {} total, {} predicted ({} with a substitute SI model), {} masked, {} missing a predictor, {} with an overflowing prediction",
        t.total, t.predicted, t.si_substituted, t.masked, t.missing_predictor, t.non_finite
    );
    write_asc(&map.ages, &out.join("age_map.asc"))?;

    if let Some(p) = stands_path {
        let stands = read_polygons(p)?;
        let est = stand_estimates_routed(&map, &stands);
        let empty = est.iter().filter(|e| e.mean_age.is_none()).count();
        if empty > 0 {
            log::warn!("{empty} stand(s) without a valid cell");
        }
        write(&out.join("stands.csv"), &format_stand_csv(&est))?;
    }
    cfg.write_manifest("predict", &out)
}
