use standage_core::evaluation::{breakdown, format_report, format_report_csv, format_scatter_csv, EvalPair};
use standage_core::geodata::{read_grid, read_polygons, zonal_weighted_mean};
use standage_core::mapping::stand_estimates;
use standage_core::models::snap_si;
use standage_core::SiClassSet;

use super::write;
use crate::config::RunConfig;
use crate::error::CliError;

/// Stand attribute carrying the known age.
pub const AGE_ATTRIBUTE: &str = "age";

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let stands_path = cfg.required_input("stands")?;
    let map_path = cfg.required_input("age_map")?;
    let psi_path = cfg.input("psi")?;
    let weighted = cfg.get::<bool>("weighted")?.unwrap_or(true);
    let out = cfg.output_dir()?;

    let stands = read_polygons(stands_path)?;
    let map = read_grid(map_path)?;
    let psi = psi_path.map(read_grid).transpose()?;
    let levels = SiClassSet::standard();
    let estimates = stand_estimates(&map, &stands);

    let mut pairs = Vec::new();
    let mut warnings = 0;
    for (stand, est) in stands.iter().zip(&estimates) {
        let Some(observed) = stand.attribute_f64(AGE_ATTRIBUTE) else {
            eprintln!("stand {}: no `{AGE_ATTRIBUTE}` attribute; excluded", stand.id);
            warnings += 1;
            continue;
        };
        let Some(predicted) = est.mean_age else {
            eprintln!("stand {}: no valid map cell inside; excluded", stand.id);
            warnings += 1;
            continue;
        };
        let class = match &psi {
            Some(g) => match zonal_weighted_mean(g, stand).map_err(CliError::from).and_then(|v| Ok(snap_si(v, &levels)?)) {
                Ok(level) => format!("pSI {level}"),
                Err(e) => {
                    eprintln!("stand {}: pSI unavailable ({e}); excluded", stand.id);
                    warnings += 1;
                    continue;
                }
            },
            None => stand.attributes.get("class").cloned().unwrap_or_else(|| "stands".into()),
        };
        pairs.push(EvalPair::new(observed, predicted, class).weighted(stand.area()));
    }
    if pairs.is_empty() {
        return Err(CliError::invalid("stands: no stand has both an observed age and an estimate"));
    }
    let report = breakdown(&pairs, weighted)?;
    write(&out.join("validation_report.txt"), &format_report(&report))?;
    write(&out.join("validation_report.csv"), &format_report_csv(&report))?;
    write(&out.join("scatter.csv"), &format_scatter_csv(&pairs))?;
    cfg.write_manifest("validate", &out)?;
    eprintln!("validated {} stand(s), {warnings} warning(s)", pairs.len());
    Ok(())
}
