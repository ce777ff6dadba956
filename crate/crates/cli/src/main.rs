//! `workwell` command-line runner.
//!
//! Exit codes: 0 ok, 2 invalid scenario, 3 parse error, 4 I/O error,
//! 5 internal failure.

mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;
use workwell_core::domain::Violation;
use workwell_core::simengine::{
    self, artifact_write_order, compare_arms, read_artifacts, render_artifacts, report_json,
    run_scenario, EngineError, ScenarioConfig, REPORT_FILE,
};

#[derive(Parser, Debug)]
#[command(
    name = "workwell",
    version,
    about = "Deterministic workplace productivity simulator"
)]
struct Cli {
    /// More output; repeat for more detail.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario and write its artifact directory.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Replaces the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        quiet: bool,
    },
    /// Check a scenario file and list every violation.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Rebuild report.json from an artifact directory.
    Report {
        #[arg(long)]
        artifacts: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render SVG plots from an artifact directory.
    Plot {
        #[arg(long)]
        artifacts: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("invalid scenario:\n{}", list(.0))]
    Invalid(Vec<Violation>),
    #[error("cannot parse {}: {message}", .path.display())]
    Parse { path: PathBuf, message: String },
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Engine(EngineError),
}

fn list(v: &[Violation]) -> String {
    v.iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Parse { .. } => 3,
            CliError::Io { .. } => 4,
            CliError::Engine(EngineError::InvalidConfig(_)) => 2,
            CliError::Engine(EngineError::Io { .. }) => 4,
            CliError::Engine(EngineError::Artifact { .. }) => 3,
            CliError::Engine(_) => 5,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::InvalidConfig(v) => CliError::Invalid(v),
            EngineError::Io { path, source } => CliError::Io { path, source },
            other => CliError::Engine(other),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn load_scenario(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    ScenarioConfig::from_json(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn checked(config: ScenarioConfig) -> Result<ScenarioConfig, CliError> {
    let v = config.validate();
    if v.is_empty() {
        Ok(config)
    } else {
        Err(CliError::Invalid(v))
    }
}

/// Writes `files` into `out` through a staging directory inside it, renaming
/// each file into place with the report last.
fn publish(
    out: &Path,
    files: &std::collections::BTreeMap<String, Vec<u8>>,
) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let staging = tempfile::Builder::new()
        .prefix(".workwell-staging-")
        .tempdir_in(out)
        .map_err(io_err(out))?;
    for (name, bytes) in files {
        let path = staging.path().join(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
    }
    for name in artifact_write_order(files) {
        let target = out.join(name);
        fs::rename(staging.path().join(name), &target).map_err(io_err(&target))?;
    }
    staging.close().map_err(io_err(out))
}

fn cmd_run(
    scenario: &Path,
    out: &Path,
    seed: Option<u64>,
    quiet: bool,
    verbose: u8,
) -> Result<(), CliError> {
    let mut config = load_scenario(scenario)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let config = checked(config)?;
    let artifacts = run_scenario(&config)?;
    let files = render_artifacts(&artifacts)?;
    publish(out, &files)?;
    if !quiet {
        let n = artifacts.cohort.len();
        for arm in &artifacts.arms {
            let finals: Vec<f64> = arm.log[arm.log.len() - n..]
                .iter()
                .map(|r| r.productivity)
                .collect();
            let mean = workwell_core::evalstats::mean(&finals).unwrap_or(f64::NAN);
            println!(
                "arm {}: mean productivity {mean:.4} over {n} employees, {} interventions",
                arm.record.arm,
                arm.interventions.len()
            );
        }
        if let Ok(cmp) = compare_arms(&artifacts) {
            let f = cmp.anova.f_statistic;
            println!(
                "anova F({}, {}) = {f:.4}",
                cmp.anova.df_between, cmp.anova.df_within
            );
        }
        if verbose > 0 {
            println!("wrote {} files to {}", files.len(), out.display());
        }
    }
    Ok(())
}

fn cmd_validate(scenario: &Path) -> Result<(), CliError> {
    let config = checked(load_scenario(scenario)?)?;
    println!(
        "ok: {} employees, {} ticks, {} arm(s)",
        config.cohort.total_count(),
        config.ticks,
        config.arms.len()
    );
    Ok(())
}

fn cmd_report(artifacts: &Path, out: &Path) -> Result<(), CliError> {
    let report = simengine::rebuild_report(artifacts)?;
    let mut files = std::collections::BTreeMap::new();
    files.insert(REPORT_FILE.to_string(), report_json(&report).into_bytes());
    publish(out, &files)?;
    println!("wrote {}", out.join(REPORT_FILE).display());
    Ok(())
}

fn cmd_plot(artifacts: &Path, out: &Path) -> Result<(), CliError> {
    let stored = read_artifacts(artifacts)?;
    let report = stored.report()?;
    let files = plot::render_all(&stored, &report);
    publish(out, &files)?;
    for name in files.keys() {
        println!("wrote {}", out.join(name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            quiet,
        } => cmd_run(scenario, out, *seed, *quiet, cli.verbose),
        Command::Validate { scenario } => cmd_validate(scenario),
        Command::Report { artifacts, out } => cmd_report(artifacts, out),
        Command::Plot { artifacts, out } => cmd_plot(artifacts, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
