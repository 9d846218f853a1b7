//! `standage`: stand-age mapping from laser metrics and age models.

mod commands;
mod config;
mod error;

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "standage", version, about = "Forest stand-age mapping toolkit")]
struct Cli {
    /// Flat key=value run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// More diagnostics (-v info, -vv debug).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Laser, spectral and terrain predictors per plot, optionally as 16 m grids.
    Metrics(MetricsArgs),
    /// Stepwise model fitting per species and site-index stratum.
    Fit(FitArgs),
    /// Wall-to-wall age map from a predictor layer stack.
    Predict(PredictArgs),
    /// Weighted stand-level validation of an age map.
    Validate(ValidateArgs),
    /// Synthetic scene with known ages.
    Synth(SynthArgs),
    /// Predicted age along one predictor with the rest held at baseline.
    Curves(CurvesArgs),
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    points: Option<PathBuf>,
    #[arg(long)]
    dtm: Option<PathBuf>,
    /// Plot polygons; the whole DTM extent when absent.
    #[arg(long)]
    plots: Option<PathBuf>,
    /// Directory with one grid per band, named like `s2_8A.asc`.
    #[arg(long)]
    spectral: Option<PathBuf>,
    /// Comma-separated percentile set.
    #[arg(long)]
    percentiles: Option<String>,
    #[arg(long)]
    cc_thresholds: Option<String>,
    /// Also write one ASCII grid per metric.
    #[arg(long)]
    grid: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum LinkArg {
    Log,
    Sqrt,
    Identity,
    Auto,
}

impl Display for LinkArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    training: Option<PathBuf>,
    #[arg(long)]
    link: Option<LinkArg>,
    /// Comma-separated candidate predictors (default: every training column).
    #[arg(long)]
    candidates: Option<String>,
    #[arg(long)]
    squares: bool,
    #[arg(long)]
    interactions: bool,
}

#[derive(Args)]
struct PredictArgs {
    /// Directory of predictor grids, one `<name>.asc` per predictor.
    #[arg(long)]
    layers: Option<PathBuf>,
    #[arg(long)]
    species: Option<PathBuf>,
    #[arg(long)]
    psi: Option<PathBuf>,
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Model registry file (default: the built-in published models).
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Stand polygons for synthetic stand estimates.
    #[arg(long)]
    stands: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    stands: Option<PathBuf>,
    #[arg(long)]
    age_map: Option<PathBuf>,
    /// pSI grid used to class stands.
    #[arg(long)]
    psi: Option<PathBuf>,
    #[arg(long)]
    weighted: Option<bool>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    ncols: Option<usize>,
    #[arg(long)]
    nrows: Option<usize>,
    /// e.g. `spruce:2,pine:1`
    #[arg(long)]
    species_mix: Option<String>,
    /// e.g. `14:1,17:1`
    #[arg(long)]
    si_mix: Option<String>,
    #[arg(long)]
    age_min: Option<f64>,
    #[arg(long)]
    age_max: Option<f64>,
    #[arg(long)]
    n_plots: Option<usize>,
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Generate without residual noise.
    #[arg(long)]
    sigma_zero: bool,
}

#[derive(Args)]
struct CurvesArgs {
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long = "species")]
    curve_species: Option<String>,
    #[arg(long = "si")]
    curve_si: Option<u8>,
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long = "from")]
    sweep_from: Option<f64>,
    #[arg(long = "to")]
    sweep_to: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Default)]
struct Pairs(BTreeMap<String, String>);

impl Pairs {
    fn opt(&mut self, key: &str, v: &Option<impl Display>) -> &mut Self {
        if let Some(v) = v {
            self.0.insert(key.into(), v.to_string());
        }
        self
    }

    fn path(&mut self, key: &str, v: &Option<PathBuf>) -> &mut Self {
        self.opt(key, &v.as_ref().map(|p| p.display()))
    }

    fn switch(&mut self, key: &str, on: bool) -> &mut Self {
        if on {
            self.0.insert(key.into(), "true".into());
        }
        self
    }
}

fn flag_pairs(cli: &Cli) -> BTreeMap<String, String> {
    let mut p = Pairs::default();
    p.opt("seed", &cli.seed).path("output", &cli.output);
    match &cli.command {
        Command::Metrics(a) => {
            p.path("points", &a.points)
                .path("dtm", &a.dtm)
                .path("plots", &a.plots)
                .path("spectral", &a.spectral)
                .opt("percentiles", &a.percentiles)
                .opt("cc_thresholds", &a.cc_thresholds)
                .switch("grid", a.grid);
        }
        Command::Fit(a) => {
            p.path("training", &a.training)
                .opt("link", &a.link)
                .opt("candidates", &a.candidates)
                .switch("squares", a.squares)
                .switch("interactions", a.interactions);
        }
        Command::Predict(a) => {
            p.path("layers", &a.layers)
                .path("species", &a.species)
                .path("psi", &a.psi)
                .path("mask", &a.mask)
                .path("registry", &a.registry)
                .path("stands", &a.stands);
        }
        Command::Validate(a) => {
            p.path("stands", &a.stands)
                .path("age_map", &a.age_map)
                .path("psi", &a.psi)
                .opt("weighted", &a.weighted);
        }
        Command::Synth(a) => {
            p.opt("ncols", &a.ncols)
                .opt("nrows", &a.nrows)
                .opt("species_mix", &a.species_mix)
                .opt("si_mix", &a.si_mix)
                .opt("age_min", &a.age_min)
                .opt("age_max", &a.age_max)
                .opt("n_plots", &a.n_plots)
                .path("registry", &a.registry)
                .switch("sigma_zero", a.sigma_zero);
        }
        Command::Curves(a) => {
            p.path("registry", &a.registry)
                .opt("curve_species", &a.curve_species)
                .opt("curve_si", &a.curve_si)
                .opt("sweep", &a.sweep)
                .opt("sweep_from", &a.sweep_from)
                .opt("sweep_to", &a.sweep_to)
                .opt("steps", &a.steps);
        }
    }
    p.0
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::invalid("threads: must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::runtime(format!("threads: {e}")))?;
    }
    let cfg = RunConfig::resolve(cli.config.as_deref(), flag_pairs(cli))?;
    match &cli.command {
        Command::Metrics(_) => commands::metrics::run(&cfg),
        Command::Fit(_) => commands::fit::run(&cfg),
        Command::Predict(_) => commands::predict::run(&cfg),
        Command::Validate(_) => commands::validate::run(&cfg),
        Command::Synth(_) => commands::synth::run(&cfg),
        Command::Curves(_) => commands::curves::run(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
