//! Command-line driver: configuration, experiment orchestration and export.

pub mod commands;
pub mod config;
pub mod output;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::time::Instant;

pub use commands::{Flow, KoopmanTarget};
pub use config::{ExperimentConfig, FieldSpec, LoadedConfig, TruncationConfig};
pub use output::{Outputs, RunReport};

use crate::error::{KblError, Result};
use commands::Ctx;

#[derive(Debug, Parser)]
#[command(name = "kbl", version, about = "Forced Burgers / Cole-Hopf / Koopman laboratory")]
pub struct Cli {
    /// JSON experiment configuration (defaults are used when omitted).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Override a config field, e.g. `--set truncation.max_mode=8`.
    #[arg(long = "set", global = true, value_name = "K=V")]
    pub set: Vec<String>,
    /// Seed for randomized suites; overrides `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Solve the Neumann eigenproblem; write the spectrum, modes and summary.
    Eigen,
    /// Evolve the initial condition along one flow over the time mesh.
    Evolve {
        #[arg(value_enum)]
        flow: Flow,
    },
    /// Evaluate a Koopman decomposition, its certificates and the oracle gap.
    Koopman {
        #[arg(value_enum)]
        target: KoopmanTarget,
    },
    /// Nonlinear heat flow of a state with mass > 1, up to blow-up.
    Blowup,
    /// Run the invariant suite and write pass/fail with margins.
    Verify {
        /// Corrupt eigenmode N before running (the checks must then fail).
        #[arg(long, value_name = "N")]
        inject_fault: Option<usize>,
    },
}

impl Command {
    pub fn label(&self) -> String {
        match self {
            Command::Eigen => "eigen".into(),
            Command::Evolve { flow } => format!("evolve {}", value_name(*flow)),
            Command::Koopman { target } => format!("koopman {}", value_name(*target)),
            Command::Blowup => "blowup".into(),
            Command::Verify { .. } => "verify".into(),
        }
    }
}

fn value_name(v: impl clap::ValueEnum) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

/// Caps the global rayon pool from `KBL_THREADS`.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("KBL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| KblError::Config(format!("KBL_THREADS must be a positive integer, got `{raw}`")))?;
    // a second initialization (tests, embedding) keeps the existing pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Loads the effective configuration for `cli`.
pub fn load_config(cli: &Cli) -> Result<LoadedConfig> {
    let mut overrides = cli.set.clone();
    if let Some(out) = &cli.out {
        overrides.push(format!("output_dir={}", serde_json::Value::String(out.display().to_string())));
    }
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Command::Verify { inject_fault: Some(n) } = cli.command {
        overrides.push(format!("fault_mode={n}"));
    }
    LoadedConfig::load(cli.config.as_deref(), &overrides)
}

/// Runs one command and always writes `report.json` into the output
/// directory, listing every file produced before success or failure.
pub fn execute(command: &Command, loaded: &LoadedConfig) -> Result<RunReport> {
    let start = Instant::now();
    let cfg = &loaded.config;
    let mut out = Outputs::create(&cfg.output_dir)?;
    let mut certificates = Vec::new();
    let result = {
        let mut ctx = Ctx {
            cfg,
            base_dir: &loaded.base_dir,
            out: &mut out,
            certificates: &mut certificates,
        };
        match command {
            Command::Eigen => commands::cmd_eigen(&mut ctx),
            Command::Evolve { flow } => commands::cmd_evolve(&mut ctx, *flow),
            Command::Koopman { target } => commands::cmd_koopman(&mut ctx, *target),
            Command::Blowup => commands::cmd_blowup(&mut ctx),
            Command::Verify { .. } => commands::cmd_verify(&mut ctx),
        }
    };
    let report = RunReport {
        command: command.label(),
        config_digest: cfg.digest(),
        seed: cfg.seed,
        wall_time_s: start.elapsed().as_secs_f64(),
        exit_code: result.as_ref().map_or_else(KblError::exit_code, |_| 0),
        error: result.as_ref().err().map(ToString::to_string),
        certificates,
        files: out.manifest().to_vec(),
    };
    out.write_json("report.json", &report)?;
    Ok(report)
}

/// Full CLI entry point; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Err(e) = configure_threads() {
        eprintln!("kbl: {e}");
        return e.exit_code();
    }
    let loaded = match load_config(&cli) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("kbl: {e}");
            write_failure_report(&cli, &e);
            return e.exit_code();
        }
    };
    match execute(&cli.command, &loaded) {
        Ok(report) => {
            let dir = loaded.config.output_dir.display();
            match &report.error {
                None => println!("kbl {}: ok, {} files in {dir}", report.command, report.files.len()),
                Some(e) => eprintln!("kbl {}: {e} (report in {dir})", report.command),
            }
            report.exit_code
        }
        Err(e) => {
            eprintln!("kbl: {e}");
            e.exit_code()
        }
    }
}

/// A config that failed to load still leaves a report when `--out` names a
/// directory to put it in.
fn write_failure_report(cli: &Cli, err: &KblError) {
    let Some(dir) = &cli.out else { return };
    let Ok(mut out) = Outputs::create(dir) else { return };
    let report = RunReport {
        command: cli.command.label(),
        config_digest: String::new(),
        seed: cli.seed.unwrap_or_default(),
        wall_time_s: 0.0,
        exit_code: err.exit_code(),
        error: Some(err.to_string()),
        certificates: Vec::new(),
        files: Vec::new(),
    };
    let _ = out.write_json("report.json", &report);
}
