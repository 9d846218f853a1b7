use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::CliError;

/// Every recognised key with its default (empty = no default).
pub const KEYS: &[(&str, &str)] = &[
    // inputs
    ("points", ""),
    ("dtm", ""),
    ("plots", ""),
    ("spectral", ""),
    ("layers", ""),
    ("species", ""),
    ("psi", ""),
    ("mask", ""),
    ("stands", ""),
    ("registry", ""),
    ("training", ""),
    ("age_map", ""),
    ("output", "."),
    // metrics
    ("percentiles", "10,25,50,75,90,95"),
    ("cc_thresholds", "2,5,10"),
    ("grid", "false"),
    // fit
    ("link", "log"),
    ("candidates", ""),
    ("squares", "false"),
    ("interactions", "false"),
    // validate
    ("weighted", "true"),
    // synth
    ("seed", "1"),
    ("ncols", "100"),
    ("nrows", "100"),
    ("species_mix", "spruce:1,pine:1,birch:1"),
    ("si_mix", "6:1,8:1,11:1,14:1,17:1,20:1,23:1,26:1"),
    ("age_min", "20"),
    ("age_max", "120"),
    ("n_plots", "500"),
    ("sigma_zero", "false"),
    // curves
    ("curve_species", ""),
    ("curve_si", ""),
    ("sweep", "h95_first"),
    ("sweep_from", "5"),
    ("sweep_to", "30"),
    ("steps", "51"),
];

/// Keys each command reads; the manifest records only these.
pub fn command_keys(command: &str) -> &'static [&'static str] {
    match command {
        "metrics" => &["points", "dtm", "plots", "spectral", "percentiles", "cc_thresholds", "grid", "output"],
        "fit" => &["training", "link", "candidates", "squares", "interactions", "output"],
        "predict" => &["layers", "species", "psi", "mask", "stands", "registry", "output"],
        "validate" => &["stands", "age_map", "psi", "weighted", "output"],
        "synth" => &[
            "seed", "ncols", "nrows", "species_mix", "si_mix", "age_min", "age_max", "n_plots", "registry",
            "sigma_zero", "output",
        ],
        "curves" => &[
            "registry", "curve_species", "curve_si", "sweep", "sweep_from", "sweep_to", "steps", "output",
        ],
        _ => &[],
    }
}

/// Resolved run options: config file values overridden by flags, defaults filled in.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

pub fn parse_pairs(text: &str, origin: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::invalid(format!("{origin}:{}: expected key=value", i + 1)))?;
        let k = k.trim();
        if k == "command" {
            continue;
        }
        if !known(k) {
            return Err(CliError::invalid(format!("{origin}:{}: unknown key `{k}`", i + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

impl RunConfig {
    pub fn resolve(file: Option<&Path>, flags: BTreeMap<String, String>) -> Result<Self, CliError> {
        let mut values: BTreeMap<String, String> = KEYS
            .iter()
            .filter(|(_, d)| !d.is_empty())
            .map(|(k, d)| (k.to_string(), d.to_string()))
            .collect();
        if let Some(path) = file {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::invalid(format!("config: cannot read {}: {e}", path.display())))?;
            values.extend(parse_pairs(&text, &path.display().to_string())?);
        }
        for k in flags.keys() {
            debug_assert!(known(k), "flag {k} has no config key");
        }
        values.extend(flags);
        Ok(Self { values })
    }

    #[cfg(test)]
    pub fn from_pairs(values: BTreeMap<String, String>) -> Self {
        Self { values }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::invalid(format!("{key}: `{v}`: {e}"))))
            .transpose()
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| CliError::invalid(format!("{key}: required")))
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        Ok(self.get::<bool>(key)?.unwrap_or(false))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.raw(key) else { return Ok(Vec::new()) };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<T>().map_err(|e| CliError::invalid(format!("{key}: `{s}`: {e}"))))
            .collect()
    }

    /// An input path that must exist.
    pub fn input(&self, key: &str) -> Result<Option<PathBuf>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(p) => {
                let path = PathBuf::from(p);
                if path.exists() {
                    Ok(Some(path))
                } else {
                    Err(CliError::invalid(format!("{key}: {} does not exist", path.display())))
                }
            }
        }
    }

    pub fn required_input(&self, key: &str) -> Result<PathBuf, CliError> {
        self.input(key)?.ok_or_else(|| CliError::invalid(format!("{key}: required")))
    }

    pub fn output_dir(&self) -> Result<PathBuf, CliError> {
        let dir = PathBuf::from(self.raw("output").unwrap_or("."));
        fs::create_dir_all(&dir).map_err(|e| CliError::runtime(format!("output: {}: {e}", dir.display())))?;
        Ok(dir)
    }

    /// `key=value` lines, sorted; parses back to the same configuration.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Replayable record of a run, written next to its outputs.
    pub fn write_manifest(&self, command: &str, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(format!("{command}.manifest"));
        let keys = command_keys(command);
        let scoped = Self {
            values: self
                .values
                .iter()
                .filter(|(k, _)| keys.contains(&k.as_str()))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        };
        let text = format!("command={command}\n{}", scoped.to_text());
        fs::write(&path, text).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.cfg");
        fs::write(&file, "# comment\nlink = sqrt\nseed=7\n").unwrap();
        let flags = BTreeMap::from([("seed".to_string(), "9".to_string())]);
        let cfg = RunConfig::resolve(Some(&file), flags).unwrap();
        assert_eq!(cfg.raw("link"), Some("sqrt"));
        assert_eq!(cfg.get::<u64>("seed").unwrap(), Some(9));
        assert_eq!(cfg.list::<u32>("percentiles").unwrap(), vec![10, 25, 50, 75, 90, 95]);
        assert!(!cfg.flag("squares").unwrap());
    }

    #[test]
    fn text_round_trip() {
        let cfg = RunConfig::resolve(None, BTreeMap::from([("dtm".into(), "a b.asc".into())])).unwrap();
        let back = RunConfig::from_pairs(parse_pairs(&cfg.to_text(), "t").unwrap());
        assert_eq!(back, cfg);
    }

    #[test]
    fn validation_names_the_field() {
        assert!(parse_pairs("colour=red\n", "t").unwrap_err().to_string().contains("colour"));
        let cfg = RunConfig::resolve(None, BTreeMap::from([("dtm".into(), "/no/such/file".into())])).unwrap();
        let e = cfg.required_input("dtm").unwrap_err();
        assert!(e.to_string().starts_with("dtm:"));
        assert_eq!(e.exit_code(), 2);
        let cfg = RunConfig::resolve(None, BTreeMap::from([("ncols".into(), "x".into())])).unwrap();
        assert!(cfg.get::<usize>("ncols").unwrap_err().to_string().starts_with("ncols:"));
    }
}
