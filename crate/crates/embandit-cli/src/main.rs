//! Command-line front door for the bandit benchmark: run experiments from
//! JSON configs, re-aggregate stored trial CSVs, render SVG comparisons,
//! and describe the built-in settings.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use embandit::environments::{
    Environment, EnvironmentSpec, Setting, GRID_HI, GRID_LO, GRID_POINTS, INTERMEDIATE_NOISE,
};
use embandit::harness::{
    aggregate_csv_path, aggregate_records, read_aggregate_csv, read_trial_csv, run_experiment,
    write_aggregate_csv, AggregateRow, ExperimentConfig, TrialRecord,
};

mod plot;

const EXIT_RUNTIME: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "embandit",
    version,
    about = "Contextual-bandit benchmark over embedded intermediate rewards"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config; write trial CSVs, the
    /// aggregate CSV, and a manifest into the output directory
    Run {
        /// Experiment config (or a manifest from an earlier run)
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: $EMBANDIT_OUT_DIR, then ".")
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's trial count
        #[arg(long)]
        trials: Option<usize>,
        /// Override the config's base seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rebuild an aggregate CSV from stored per-trial CSVs
    Aggregate {
        /// Per-trial CSV files (one homogeneous experiment)
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        /// Output aggregate CSV path
        #[arg(long)]
        out: PathBuf,
    },
    /// Render aggregate CSVs as one SVG: mean line plus 5-95% band each
    Plot {
        /// Aggregate CSV files (one series per file)
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        /// Output SVG path
        #[arg(long)]
        out: PathBuf,
    },
    /// Describe the built-in benchmark settings
    ListSettings {
        /// Emit JSON instead of a table
        #[arg(long)]
        machine: bool,
    },
}

/// A failure destined for stderr, tagged with the process exit code.
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    fn runtime(message: impl Into<String>) -> Self {
        CliError { code: EXIT_RUNTIME, message: message.into() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config, out, trials, seed } => cmd_run(&config, out, trials, seed),
        Command::Aggregate { inputs, out } => cmd_aggregate(&inputs, &out),
        Command::Plot { inputs, out } => cmd_plot(&inputs, &out),
        Command::ListSettings { machine } => cmd_list_settings(machine),
    }
}

/// What `run` writes next to its CSVs: enough to reproduce the run.
#[derive(Serialize, Deserialize)]
struct Manifest {
    library_version: String,
    config: ExperimentConfig,
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    // A manifest from an earlier run is accepted directly, so reruns are
    // `run --config manifest.json`.
    if let Ok(manifest) = serde_json::from_str::<Manifest>(&text) {
        return Ok(manifest.config);
    }
    serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
}

fn manifest_path(out_dir: &Path, config: &ExperimentConfig) -> PathBuf {
    out_dir.join(format!(
        "manifest_{}_{}.json",
        config.setting,
        config.algorithm.as_str().replace('-', "_")
    ))
}

fn cmd_run(
    config_path: &Path,
    out: Option<PathBuf>,
    trials: Option<usize>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let mut config = load_config(config_path)?;
    if let Some(n) = trials {
        config.trials = n;
    }
    if let Some(s) = seed {
        config.base_seed = s;
    }
    config
        .validate()
        .map_err(|e| CliError::usage(format!("invalid config: {e}")))?;

    let out_dir = out
        .or_else(|| std::env::var_os("EMBANDIT_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));

    let outcome = run_experiment(&config, &out_dir)
        .map_err(|e| CliError::runtime(format!("run failed: {e}")))?;
    for (trial, err) in &outcome.failures {
        eprintln!("warning: trial {trial} failed and is excluded from the aggregate: {err}");
    }

    let manifest = Manifest { library_version: embandit::VERSION.to_string(), config };
    let mpath = manifest_path(&out_dir, &manifest.config);
    let body = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::runtime(format!("manifest serialization failed: {e}")))?;
    std::fs::write(&mpath, body + "\n")
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", mpath.display())))?;

    let agg = &outcome.aggregate;
    println!(
        "{} {}: {} trials x {} rounds, mean terminal cumulative reward {:.3}",
        agg.setting,
        agg.algorithm,
        agg.n_trials,
        agg.rounds,
        agg.mean_cumulative.last().copied().unwrap_or(0.0)
    );
    println!("wrote {}", aggregate_csv_path(&out_dir, &manifest.config).display());
    println!("wrote {}", mpath.display());
    Ok(())
}

fn cmd_aggregate(inputs: &[PathBuf], out: &Path) -> Result<(), CliError> {
    let records: Vec<TrialRecord> = inputs
        .iter()
        .map(|p| {
            read_trial_csv(p)
                .map_err(|e| CliError::usage(format!("bad trial CSV {}: {e}", p.display())))
        })
        .collect::<Result<_, _>>()?;
    let aggregate = aggregate_records(&records)
        .map_err(|e| CliError::usage(format!("cannot aggregate inputs: {e}")))?;
    write_aggregate_csv(out, &aggregate)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", out.display())))?;
    println!(
        "aggregated {} trials x {} rounds into {}",
        aggregate.n_trials,
        aggregate.rounds,
        out.display()
    );
    Ok(())
}

fn cmd_plot(inputs: &[PathBuf], out: &Path) -> Result<(), CliError> {
    let mut series = Vec::with_capacity(inputs.len());
    for path in inputs {
        let rows: Vec<AggregateRow> = read_aggregate_csv(path)
            .map_err(|e| CliError::usage(format!("bad aggregate CSV {}: {e}", path.display())))?;
        let label = format!("{} {}", rows[0].setting, rows[0].algorithm);
        series.push(plot::Series {
            label,
            rounds: rows.iter().map(|r| r.round as f64).collect(),
            mean: rows.iter().map(|r| r.mean_cumulative).collect(),
            lo: rows.iter().map(|r| r.q05).collect(),
            hi: rows.iter().map(|r| r.q95).collect(),
        });
    }
    let svg = plot::render(&series, "Cumulative reward, mean and 5-95% band")
        .map_err(|e| CliError::usage(format!("cannot render plot: {e}")))?;
    std::fs::write(out, svg)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", out.display())))?;
    println!("wrote {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct SettingInfo {
    setting: String,
    d_r: usize,
    grid_points: usize,
    grid_lo: f64,
    grid_hi: f64,
    intermediate_noise: f64,
    ultimate_noise: f64,
}

fn setting_infos() -> Vec<SettingInfo> {
    Setting::ALL
        .iter()
        .map(|s| {
            let env = EnvironmentSpec::new(*s);
            SettingInfo {
                setting: s.to_string(),
                d_r: Environment::<f64>::d_r(&env),
                grid_points: GRID_POINTS,
                grid_lo: GRID_LO,
                grid_hi: GRID_HI,
                intermediate_noise: INTERMEDIATE_NOISE,
                ultimate_noise: env.ultimate_noise(),
            }
        })
        .collect()
}

fn cmd_list_settings(machine: bool) -> Result<(), CliError> {
    let infos = setting_infos();
    if machine {
        let body = serde_json::to_string_pretty(&infos)
            .map_err(|e| CliError::runtime(format!("serialization failed: {e}")))?;
        println!("{body}");
        return Ok(());
    }
    println!("setting  d_r  action/context grid            noise(r)  noise(y)");
    for info in infos {
        println!(
            "{:<7}  {:<3}  {} points on [{}, {}]  {:<8}  {:<8}",
            info.setting,
            info.d_r,
            info.grid_points,
            info.grid_lo,
            info.grid_hi,
            info.intermediate_noise,
            info.ultimate_noise
        );
    }
    Ok(())
}
