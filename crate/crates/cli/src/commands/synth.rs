use std::fs;

use standage_core::evaluation::{synth_scene, SceneSpec};
use standage_core::Species;

use super::{registry, write, write_asc};
use crate::config::RunConfig;
use crate::error::CliError;

fn mix<T: std::str::FromStr>(cfg: &RunConfig, key: &str) -> Result<Vec<(T, f64)>, CliError> {
    cfg.list::<String>(key)?
        .iter()
        .map(|item| {
            let bad = || CliError::invalid(format!("{key}: `{item}` is not name:weight"));
            let (name, w) = item.split_once(':').ok_or_else(bad)?;
            Ok((name.parse().map_err(|_| bad())?, w.parse().map_err(|_| bad())?))
        })
        .collect()
}

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let mut reg = registry(cfg)?;
    if cfg.flag("sigma_zero")? {
        for m in reg.models_mut() {
            m.sigma = 0.0;
        }
    }
    let spec = SceneSpec {
        ncols: cfg.require("ncols")?,
        nrows: cfg.require("nrows")?,
        species_mix: mix::<Species>(cfg, "species_mix")?,
        si_mix: mix::<u8>(cfg, "si_mix")?,
        age_range: (cfg.require("age_min")?, cfg.require("age_max")?),
        seed: cfg.require("seed")?,
        n_plots: cfg.require("n_plots")?,
        ..Default::default()
    };
    let out = cfg.output_dir()?;
    let scene = synth_scene(&reg, &spec)?;

    let layers = out.join("layers");
    fs::create_dir_all(&layers).map_err(|e| CliError::runtime(format!("{}: {e}", layers.display())))?;
    for (name, g) in scene.stack.layers() {
        write_asc(g, &layers.join(format!("{name}.asc")))?;
    }
    write_asc(scene.stack.species(), &out.join("species.asc"))?;
    write_asc(scene.stack.psi(), &out.join("psi.asc"))?;
    write_asc(&scene.truth, &out.join("truth.asc"))?;
    write_asc(&scene.observed, &out.join("observed.asc"))?;

    let names: Vec<String> = scene
        .plots
        .first()
        .map(|p| p.predictors.iter().map(|(n, _)| n.to_string()).collect())
        .unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string(), "species".into(), "si".into(), "age".into()];
    header.extend(names.iter().cloned());
    let csv_err = |e: csv::Error| CliError::runtime(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for p in &scene.plots {
        let mut rec = vec![p.id.clone(), p.species.to_string(), p.si.to_string(), p.observed_age.to_string()];
        rec.extend(names.iter().map(|n| p.predictors.get(n).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::runtime(e.to_string()))?;
    write(&out.join("plots.csv"), &String::from_utf8_lossy(&bytes))?;
    write(&out.join("scene.txt"), &scene.manifest)?;
    cfg.write_manifest("synth", &out)?;
    eprintln!(
        "scene {}x{} with {} plots, {} redraws",
        spec.ncols,
        spec.nrows,
        scene.plots.len(),
        scene.redraws
    );
    Ok(())
}
