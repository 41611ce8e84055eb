//! Command-line front end for the causal evaluation pipeline.
//!
//! Subcommands: `identify`, `run`, `simulate`, `blend`, `recommend`,
//! `skill`. Exit codes: 0 success, 2 config/IO error, 3 identification
//! failure, 4 data-horizon/extent failure. Verbosity via `AGROCAUSAL_LOG`.

mod config;
mod pipeline;
mod report;

use agrocausal::blend::{self, BlendError, ForecastGrid, StationSeries, WeatherVar};
use agrocausal::rules::{self, RuleError, RuleSet};
use anyhow::anyhow;
use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use config::{GridPaths, LoadedConfig};
use pipeline::NoAdjustmentSet;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "agrocausal", version, about = "Causal evaluation of sowing recommendations")]
struct Cli {
    /// JSON pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; required for stochastic commands (no wall-clock default).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for generated files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// List valid back-door adjustment sets and pick one.
    Identify,
    /// Estimate the treatment effect and run the refutation matrix.
    Run {
        /// Simulate data from an SCM spec instead of loading a dataset
        /// (value optional; defaults to the built-in farm SCM).
        #[arg(long, num_args = 0..=1, default_missing_value = "")]
        simulate: Option<String>,
        /// Comma-separated estimator names.
        #[arg(long)]
        estimators: Option<String>,
        /// Comma-separated refuter names.
        #[arg(long)]
        refuters: Option<String>,
    },
    /// Draw a synthetic dataset from an SCM and report its oracle effect.
    Simulate {
        /// SCM spec path; defaults to the built-in farm SCM.
        scm: Option<String>,
        /// Number of rows (overrides the config).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Blend fine and coarse forecast grids into a 10-day grid.
    Blend,
    /// Emit favorable/unfavorable recommendation maps for a date.
    Recommend {
        #[arg(long)]
        date: NaiveDate,
    },
    /// Score a forecast grid against station measurements.
    Skill,
}

struct CodedError {
    code: i32,
    inner: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for CodedError {
    fn from(e: E) -> Self {
        let inner = e.into();
        let code = if inner.downcast_ref::<NoAdjustmentSet>().is_some() {
            3
        } else {
            2
        };
        CodedError { code, inner }
    }
}

/// Horizon/extent failures exit with code 4.
fn data_shape_error(inner: anyhow::Error) -> CodedError {
    CodedError { code: 4, inner }
}

fn blend_error(e: BlendError) -> CodedError {
    match e {
        BlendError::ExtentMismatch(_)
        | BlendError::IssueDateMismatch { .. }
        | BlendError::InsufficientHorizon { .. }
        | BlendError::MissingVariable(_)
        | BlendError::OutOfGrid { .. }
        | BlendError::NoOverlap => data_shape_error(e.into()),
        other => CodedError::from(other),
    }
}

fn rule_error(e: RuleError) -> CodedError {
    match e {
        RuleError::InsufficientHorizon { .. }
        | RuleError::MissingMap(_)
        | RuleError::OutOfGrid { .. } => data_shape_error(e.into()),
        other => CodedError::from(other),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("AGROCAUSAL_LOG")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {:#}", e.inner);
            std::process::exit(e.code);
        }
    }
}

fn require_seed(cli: &Cli) -> Result<u64, CodedError> {
    cli.seed
        .ok_or_else(|| anyhow!("--seed is required (no wall-clock default)").into())
}

fn out_dir(cli: &Cli) -> Result<PathBuf, CodedError> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| {
        CodedError::from(anyhow!("cannot create output directory {}: {e}", dir.display()))
    })?;
    Ok(dir)
}

fn dispatch(cli: &Cli) -> Result<(), CodedError> {
    let loaded = LoadedConfig::load(cli.config.as_deref())?;
    match &cli.cmd {
        Cmd::Identify => cmd_identify(cli, &loaded),
        Cmd::Run {
            simulate,
            estimators,
            refuters,
        } => cmd_run(
            cli,
            &loaded,
            simulate.as_deref(),
            estimators.as_deref(),
            refuters.as_deref(),
        ),
        Cmd::Simulate { scm, n } => cmd_simulate(cli, &loaded, scm.as_deref(), *n),
        Cmd::Blend => cmd_blend(cli, &loaded),
        Cmd::Recommend { date } => cmd_recommend(cli, &loaded, *date),
        Cmd::Skill => cmd_skill(cli, &loaded),
    }
}

fn cmd_identify(cli: &Cli, loaded: &LoadedConfig) -> Result<(), CodedError> {
    let graph = pipeline::load_graph(&loaded.config)?;
    let (sets, chosen) = pipeline::choose_adjustment(&graph, &loaded.config)?;
    println!("valid back-door adjustment sets ({}):", sets.len());
    for s in &sets {
        let members: Vec<&str> = s.members.iter().map(|m| m.as_str()).collect();
        println!(
            "  {{{}}}{}",
            members.join(", "),
            if s.minimal { "  (minimal)" } else { "" }
        );
    }
    println!("chosen: {{{}}}", chosen.join(", "));
    if cli.out.is_some() {
        let dir = out_dir(cli)?;
        let payload = serde_json::json!({
            "sets": sets,
            "chosen": chosen,
        });
        std::fs::write(
            dir.join("identify.json"),
            serde_json::to_string_pretty(&payload).unwrap(),
        )
        .map_err(anyhow::Error::from)?;
    }
    Ok(())
}

fn cmd_run(
    cli: &Cli,
    loaded: &LoadedConfig,
    simulate: Option<&str>,
    estimators: Option<&str>,
    refuters: Option<&str>,
) -> Result<(), CodedError> {
    let seed = require_seed(cli)?;
    let config = &loaded.config;
    let graph = pipeline::load_graph(config)?;
    let (_, chosen) = pipeline::choose_adjustment(&graph, config)?;
    let methods = pipeline::parse_methods(estimators, config)?;
    let refuters = pipeline::parse_refuters(refuters, config)?;
    let data = pipeline::prepare_data(config, &graph, &chosen, simulate, seed)?;
    let report =
        pipeline::run_matrix(config, &data, &chosen, &methods, &refuters, seed, &loaded.sha256)?;

    print!("{}", report.to_table());
    if cli.out.is_some() {
        let dir = out_dir(cli)?;
        std::fs::write(dir.join("report.json"), report.to_json()).map_err(anyhow::Error::from)?;
        std::fs::write(dir.join("report.txt"), report.to_table()).map_err(anyhow::Error::from)?;
        println!("\nreport written to {}", dir.join("report.json").display());
    }
    Ok(())
}

fn cmd_simulate(
    cli: &Cli,
    loaded: &LoadedConfig,
    scm_path: Option<&str>,
    n: Option<usize>,
) -> Result<(), CodedError> {
    let seed = require_seed(cli)?;
    let config = &loaded.config;
    let scm = pipeline::load_scm(config, scm_path.or(Some("")))?;
    let n = n.unwrap_or(config.n_simulate);
    let dataset = scm
        .sample(n, agrocausal::exec::derive_seed(seed, 101))
        .map_err(|e| anyhow!("simulation failed: {e}"))?;
    let (ate, mc_se) = scm
        .true_ate(config.n_oracle, agrocausal::exec::derive_seed(seed, 102))
        .map_err(|e| anyhow!("oracle simulation failed: {e}"))?;
    let treated: usize = dataset
        .treatment()
        .map_err(anyhow::Error::from)?
        .iter()
        .map(|&v| v as usize)
        .sum();

    let dir = out_dir(cli)?;
    let path = dir.join("simulated_fields.csv");
    dataset.to_csv(&path).map_err(anyhow::Error::from)?;
    println!(
        "wrote {} rows ({} treated, {} control) to {}",
        n,
        treated,
        n - treated,
        path.display()
    );
    println!("oracle ATE: {ate:.4} (mc se {mc_se:.4})");
    Ok(())
}

fn load_grid(paths: &GridPaths) -> Result<ForecastGrid, CodedError> {
    ForecastGrid::load(&paths.csv, &paths.sidecar).map_err(blend_error)
}

fn cmd_blend(cli: &Cli, loaded: &LoadedConfig) -> Result<(), CodedError> {
    let config = &loaded.config;
    let fine_paths = config
        .fine_grid
        .as_ref()
        .ok_or_else(|| CodedError::from(anyhow!("config needs fine_grid for blend")))?;
    let coarse_paths = config
        .coarse_grid
        .as_ref()
        .ok_or_else(|| CodedError::from(anyhow!("config needs coarse_grid for blend")))?;
    let fine = load_grid(fine_paths)?;
    let coarse = load_grid(coarse_paths)?;
    let art = blend::synthesize_art(&fine, &coarse, config.trend_units).map_err(blend_error)?;

    let dir = out_dir(cli)?;
    let csv = dir.join("art.csv");
    let sidecar = dir.join("art.json");
    art.save(&csv, &sidecar).map_err(blend_error)?;
    println!(
        "blended {} cells x {} days ({} variables) -> {}",
        art.geometry.n_cells(),
        art.horizon_days,
        art.variables().len(),
        csv.display()
    );
    Ok(())
}

fn recommend_grid(config: &config::PipelineConfig) -> Result<ForecastGrid, CodedError> {
    if let Some(paths) = &config.forecast_grid {
        return load_grid(paths);
    }
    match (&config.fine_grid, &config.coarse_grid) {
        (Some(f), Some(c)) => {
            let fine = load_grid(f)?;
            let coarse = load_grid(c)?;
            blend::synthesize_art(&fine, &coarse, config.trend_units).map_err(blend_error)
        }
        _ => Err(anyhow!("config needs forecast_grid (or fine_grid + coarse_grid)").into()),
    }
}

fn load_rules(config: &config::PipelineConfig) -> Result<RuleSet, CodedError> {
    match &config.rules_file {
        Some(p) => {
            let raw = std::fs::read_to_string(p)
                .map_err(|e| anyhow!("cannot read rules {}: {e}", p.display()))?;
            RuleSet::from_json(&raw).map_err(|e| anyhow!("bad rules {}: {e}", p.display()).into())
        }
        None => Ok(RuleSet::cotton_default()),
    }
}

fn cmd_recommend(cli: &Cli, loaded: &LoadedConfig, date: NaiveDate) -> Result<(), CodedError> {
    let config = &loaded.config;
    let grid = recommend_grid(config)?;
    let ruleset = load_rules(config)?;
    let map = rules::recommendation_map(&grid, &ruleset, date).map_err(rule_error)?;

    let dir = out_dir(cli)?;
    let geojson = dir.join(format!("map_{date}.geojson"));
    let csv = dir.join(format!("map_{date}.csv"));
    std::fs::write(&geojson, serde_json::to_string_pretty(&map.to_geojson()).unwrap())
        .map_err(anyhow::Error::from)?;
    std::fs::write(&csv, map.to_csv_string()).map_err(anyhow::Error::from)?;

    let total = map.cells.len();
    let pct = 100.0 * map.n_favorable as f64 / total as f64;
    println!(
        "{date}: {}/{} cells favorable ({pct:.0}% favorable)",
        map.n_favorable, total
    );
    println!("maps written to {} and {}", geojson.display(), csv.display());
    Ok(())
}

fn cmd_skill(cli: &Cli, loaded: &LoadedConfig) -> Result<(), CodedError> {
    let config = &loaded.config;
    let grid = recommend_grid(config)?;
    let station_cfg = config
        .station
        .as_ref()
        .ok_or_else(|| CodedError::from(anyhow!("config needs station for skill")))?;
    let station = StationSeries::from_csv(
        Path::new(&station_cfg.csv),
        station_cfg.lat,
        station_cfg.lon,
    )
    .map_err(blend_error)?;
    let cell = grid
        .nearest_cell(station_cfg.lat, station_cfg.lon)
        .map_err(blend_error)?;

    let mut results = Vec::new();
    for var in [WeatherVar::AirTMax, WeatherVar::AirTMin] {
        let Some(series) = grid.series(var, cell) else {
            continue;
        };
        let dated: Vec<(NaiveDate, f64)> = series
            .iter()
            .enumerate()
            .map(|(d, &v)| (grid.day_date(d + 1), v))
            .collect();
        let s = blend::skill(&dated, &station, var).map_err(blend_error)?;
        println!(
            "{}: mae={:.3} rmse={:.3} n={}",
            var.name(),
            s.mae,
            s.rmse,
            s.n
        );
        results.push(serde_json::json!({
            "variable": var.name(),
            "mae": s.mae,
            "rmse": s.rmse,
            "n": s.n,
        }));
    }
    if results.is_empty() {
        return Err(data_shape_error(anyhow!(
            "grid has no station-comparable variables (air_t_max/air_t_min)"
        )));
    }
    if cli.out.is_some() {
        let dir = out_dir(cli)?;
        std::fs::write(
            dir.join("skill.json"),
            serde_json::to_string_pretty(&results).unwrap(),
        )
        .map_err(anyhow::Error::from)?;
    }
    Ok(())
}
