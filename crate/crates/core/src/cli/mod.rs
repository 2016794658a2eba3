//! Scenario configuration, the scenario runner, the acceptance suite and the
//! command-line front end of the `gravicav` binary.

pub mod acceptance;
mod config;
mod runner;

use std::f64::consts::PI;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::{
    parse_config, BchParams, CoherentParams, ConfigError, ConventionArg, DynamicsArg, FrameArg,
    OracleParams, Scenario, ScenarioKind, SqueezedParams, ThermalParams, TimeGrid, VacuumParams,
    VariantArg, OPTICAL_OMEGA0,
};
pub use runner::{
    coherent_rows, evaluate, oracle_verify_rows, output_paths, run, squeezed_correction_ratio,
    squeezed_rows, vacuum_rows, write_csv, OracleColumns, Row, RunOptions, RunSummary,
    ScenarioOutput, Status, ORACLE_HEADER, VACUUM_HEADER,
};

use crate::oracle::JointSystem;
use acceptance::AcceptanceOptions;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "gravicav", version, about = "Cavity field response to quantized gravitational waves")]
pub struct Cli {
    /// Frame for oracle scenarios (overrides the config).
    #[arg(long, global = true, value_enum)]
    pub frame: Option<FrameArg>,
    /// Optical angular frequency in rad/s (overrides the config).
    #[arg(long, global = true)]
    pub omega0: Option<f64>,
    /// Phase convention of the vacuum variance.
    #[arg(long, global = true, value_enum)]
    pub convention: Option<ConventionArg>,
    /// Exact closed forms or the published approximations.
    #[arg(long, global = true, value_enum)]
    pub variant: Option<VariantArg>,
    /// Largest Hilbert-space dimension the oracle may build.
    #[arg(long, global = true, env = "GRAVICAV_BUDGET", default_value_t = JointSystem::DEFAULT_BUDGET)]
    pub budget: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every scenario of a JSON configuration file.
    Simulate {
        config: PathBuf,
        /// Directory for relative output prefixes.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Tabulate the vacuum quadrature variance over the Kerr phase F.
    SweepVariance {
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 4.0 * PI)]
        fmax: f64,
        #[arg(long, default_value_t = 2001)]
        samples: usize,
        #[arg(long = "d", default_value_t = 1.0)]
        d: f64,
        /// CSV destination; stdout if absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check the oracle against the closed forms, the factorized unitary and
    /// the BCH identities.
    Verify,
    /// Run the full acceptance suite.
    Acceptance,
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    match &cli.command {
        Command::Simulate { config, out_dir } => simulate(&cli, config, out_dir),
        Command::SweepVariance { alpha, fmax, samples, d, output } => {
            sweep(&cli, *alpha, *fmax, *samples, *d, output.as_deref())
        }
        Command::Verify => criteria(&cli, &[3, 4, 5]),
        Command::Acceptance => criteria(&cli, &(1..=acceptance::CRITERIA).collect::<Vec<_>>()),
    }
}

fn run_options(cli: &Cli, out_dir: PathBuf) -> RunOptions {
    RunOptions {
        out_dir,
        budget: cli.budget,
        convention: cli.convention,
        frame: cli.frame,
        variant: cli.variant,
        write_files: true,
    }
}

/// Applies a global `--omega0` to every scenario that carries one.
pub fn override_omega0(scenario: &mut Scenario, omega0: f64) {
    match &mut scenario.kind {
        ScenarioKind::VacuumSqueezing(p) => p.omega0 = omega0,
        ScenarioKind::ThermalCheck(p) => p.omega0 = omega0,
        ScenarioKind::OracleVerify(p) => p.omega0 = omega0,
        ScenarioKind::CoherentGw(_) | ScenarioKind::SqueezedGw(_) | ScenarioKind::BchVerify(_) => {}
    }
}

fn simulate(cli: &Cli, path: &Path, out_dir: &Path) -> i32 {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return EXIT_CONFIG;
        }
    };
    let mut scenarios = match parse_config(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_CONFIG;
        }
    };
    if let Some(w) = cli.omega0 {
        if !(w.is_finite() && w > 0.0) {
            eprintln!("error: --omega0 must be positive and finite");
            return EXIT_CONFIG;
        }
        scenarios.iter_mut().for_each(|s| override_omega0(s, w));
    }
    let opts = run_options(cli, out_dir.to_path_buf());
    let mut code = EXIT_OK;
    for scenario in &scenarios {
        match run(scenario, &opts) {
            Ok(summary) => {
                println!(
                    "{:<4} {} ({:.2}s)",
                    format!("{:?}", summary.status).to_lowercase(),
                    summary.name,
                    summary.runtime_s
                );
                for m in &summary.messages {
                    println!("     {m}");
                }
                if summary.status.is_failure() {
                    code = EXIT_FAILURE;
                }
            }
            Err(e) => {
                eprintln!("error: {}: {e}", scenario.name);
                code = EXIT_FAILURE;
            }
        }
    }
    code
}

fn sweep(cli: &Cli, alpha: f64, fmax: f64, samples: usize, d: f64, output: Option<&Path>) -> i32 {
    if samples < 2 || !(fmax.is_finite() && fmax > 0.0) {
        eprintln!("error: need --samples ≥ 2 and a positive --fmax");
        return EXIT_CONFIG;
    }
    let p = VacuumParams {
        alpha,
        d,
        omega0: cli.omega0.unwrap_or(OPTICAL_OMEGA0),
        ..VacuumParams::default()
    };
    let conv = cli.convention.unwrap_or(p.convention).into();
    let rows = match vacuum_rows(&p, conv, &TimeGrid::new(0.0, fmax, samples).points()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };
    let written = match output {
        Some(path) => fs::File::create(path)
            .map_err(csv::Error::from)
            .and_then(|f| write_csv(io::BufWriter::new(f), &rows)),
        None => write_csv(io::stdout().lock(), &rows),
    };
    match written {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn criteria(cli: &Cli, ids: &[usize]) -> i32 {
    let opts = AcceptanceOptions {
        convention: cli.convention.unwrap_or_default().into(),
        budget: cli.budget,
    };
    let mut passed = 0;
    let mut out = io::stdout().lock();
    for &id in ids {
        let r = acceptance::run_criterion(id, &opts);
        passed += usize::from(r.passed);
        let _ = writeln!(out, "{r}");
    }
    let _ = writeln!(out, "{passed}/{} criteria passed", ids.len());
    if passed == ids.len() {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}
