use std::fmt::Write as _;

use standage_core::evaluation::DEFAULT_BASELINE;
use standage_core::models::response_curve;
use standage_core::predictors::H95;
use standage_core::{PredictorVector, Species};

use super::{registry, write};
use crate::config::RunConfig;
use crate::error::CliError;

/// Height used for `h95_first` when another predictor is swept.
const BASELINE_H95: f64 = 15.0;

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let reg = registry(cfg)?;
    let species: Option<Species> = cfg.get("curve_species")?;
    let si: Option<u8> = cfg.get("curve_si")?;
    let sweep: String = cfg.require("sweep")?;
    let range = (cfg.require::<f64>("sweep_from")?, cfg.require::<f64>("sweep_to")?);
    let steps: usize = cfg.require("steps")?;
    let out = cfg.output_dir()?;

    let mut baseline = PredictorVector::from_pairs(DEFAULT_BASELINE);
    baseline.set(H95, BASELINE_H95);

    let mut csv = String::from("species,si,predictor,value,age\n");
    let mut curves = 0;
    for m in reg.models() {
        if species.is_some_and(|s| s != m.species) || si.is_some_and(|s| s != m.si) {
            continue;
        }
        let uses = m.uses(&sweep) || (sweep == H95 && m.uses("h95_first2"));
        if !uses {
            continue;
        }
        for (x, age) in response_curve(m, &sweep, range, steps, &baseline)? {
            let _ = writeln!(csv, "{},{},{sweep},{x},{age}", m.species, m.si);
        }
        curves += 1;
    }
    if curves == 0 {
        return Err(CliError::invalid(format!("sweep: no selected model uses `{sweep}`")));
    }
    write(&out.join("curves.csv"), &csv)?;
    cfg.write_manifest("curves", &out)?;
    eprintln!("wrote {curves} response curve(s)");
    Ok(())
}
