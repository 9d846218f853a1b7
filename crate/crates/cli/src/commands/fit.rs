use std::collections::BTreeMap;
use std::path::Path;

use standage_core::fitting::{
    compare_links, fit_report_csv, format_fit_report, stepwise_select_with, FitSummary, StepwiseOptions, TrainingRow,
};
use standage_core::models::format_registry;
use standage_core::{Link, ModelRegistry, PredictorVector, Species, TrainingSet};

use super::write;
use crate::config::RunConfig;
use crate::error::CliError;

const RESERVED: [&str; 4] = ["id", "species", "si", "age"];

pub struct TrainingTable {
    pub predictors: Vec<String>,
    pub strata: BTreeMap<(Species, u8), Vec<TrainingRow>>,
}

/// Training CSV with `species`, `si`, `age`, an optional `id` and one column per predictor.
pub fn read_training(path: &Path) -> Result<TrainingTable, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::invalid(format!("training: {}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| CliError::invalid(format!("training: header: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(c_species), Some(c_si), Some(c_age)) = (col("species"), col("si"), col("age")) else {
        return Err(CliError::invalid("training: header needs species, si and age columns"));
    };
    let c_id = col("id");
    let predictors: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| !RESERVED.contains(h))
        .map(|(i, h)| (i, h.to_string()))
        .collect();

    let mut strata: BTreeMap<(Species, u8), Vec<TrainingRow>> = BTreeMap::new();
    for (n, rec) in rdr.records().enumerate() {
        let row = n + 1;
        let rec = rec.map_err(|e| CliError::invalid(format!("training: row {row}: {e}")))?;
        let bad = |what: &str, v: &str| CliError::invalid(format!("training: row {row}: bad {what} `{v}`"));
        let species: Species = rec[c_species].parse().map_err(|_| bad("species", &rec[c_species]))?;
        let si: u8 = rec[c_si].parse().map_err(|_| bad("si", &rec[c_si]))?;
        let age: f64 = rec[c_age].parse().map_err(|_| bad("age", &rec[c_age]))?;
        if !(age > 0.0) {
            return Err(bad("age", &rec[c_age]));
        }
        let mut x = PredictorVector::new();
        for (i, name) in &predictors {
            let v = &rec[*i];
            if v.is_empty() || v == "NA" {
                x.set_missing(name);
            } else {
                x.set(name, v.parse().map_err(|_| bad(name, v))?);
            }
        }
        let id = c_id.map(|c| rec[c].to_string()).unwrap_or_else(|| row.to_string());
        strata.entry((species, si)).or_default().push(TrainingRow {
            id,
            age,
            predictors: x,
        });
    }
    Ok(TrainingTable {
        predictors: predictors.into_iter().map(|(_, n)| n).collect(),
        strata,
    })
}

fn fit_stratum(
    data: &TrainingSet,
    candidates: &[String],
    link: Option<Link>,
    opts: &StepwiseOptions,
) -> Result<(FitSummary, String), CliError> {
    match link {
        Some(l) => Ok((stepwise_select_with(data, candidates, l, opts)?, String::new())),
        None => {
            let first = stepwise_select_with(data, candidates, Link::Log, opts)?;
            let names: Vec<String> = first.term_names().iter().map(|s| s.to_string()).collect();
            let cmp = compare_links(data, &names)?;
            let mut note = String::from("link comparison (back-transformed RMSE / MD, years):");
            for (l, s) in &cmp.scores {
                note.push_str(&format!(" {l} {:.3} / {:.3};", s.rmse, s.md));
            }
            note.push_str(&format!(" chosen {}\n", cmp.best));
            let fit = if cmp.best == Link::Log {
                first
            } else {
                stepwise_select_with(data, candidates, cmp.best, opts)?
            };
            Ok((fit, note))
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let training = cfg.required_input("training")?;
    let link = match cfg.raw("link").unwrap_or("log") {
        "auto" => None,
        other => Some(other.parse::<Link>().map_err(|e| CliError::invalid(format!("link: {e}")))?),
    };
    let opts = StepwiseOptions {
        squares: cfg.flag("squares")?,
        interactions: cfg.flag("interactions")?,
        ..Default::default()
    };
    let out = cfg.output_dir()?;
    let table = read_training(&training)?;
    let candidates: Vec<String> = match cfg.list::<String>("candidates")? {
        c if c.is_empty() => table.predictors.clone(),
        c => c,
    };
    if let Some(c) = candidates.iter().find(|c| !table.predictors.contains(c)) {
        return Err(CliError::invalid(format!("candidates: `{c}` is not a training column")));
    }

    let mut registry = ModelRegistry::new(format!("fit:{}", training.display()));
    let mut report = String::new();
    let mut csv = String::new();
    let mut skipped = Vec::new();
    for ((species, si), rows) in table.strata {
        let n = rows.len();
        if n <= candidates.len() + 2 {
            skipped.push(format!("{species} SI {si}: n = {n} is too small for {} candidates", candidates.len()));
            continue;
        }
        let data = TrainingSet::new(species, si, rows)?;
        match fit_stratum(&data, &candidates, link, &opts) {
            Ok((fit, note)) => {
                report.push_str(&format_fit_report(&fit));
                report.push_str(&note);
                report.push('\n');
                let body = fit_report_csv(&fit);
                if csv.is_empty() {
                    csv.push_str(&body);
                } else {
                    csv.extend(body.lines().skip(1).map(|l| format!("{l}\n")));
                }
                registry.insert(fit.model)?;
            }
            Err(e) => skipped.push(format!("{species} SI {si}: {e}")),
        }
    }
    if !skipped.is_empty() {
        report.push_str("Skipped strata\n");
        for s in &skipped {
            report.push_str(&format!("  {s}\n"));
            log::warn!("skipped {s}");
        }
    }
    write(&out.join("fit_report.txt"), &report)?;
    write(&out.join("fit_report.csv"), &csv)?;
    write(&out.join("registry.txt"), &format_registry(&registry))?;
    cfg.write_manifest("fit", &out)?;
    eprintln!("fitted {} stratum model(s), skipped {}", registry.len(), skipped.len());
    if registry.is_empty() {
        return Err(CliError::runtime("no stratum could be fitted"));
    }
    Ok(())
}
