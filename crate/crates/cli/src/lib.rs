//! Command-line front end: configuration, subcommands and file output.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use cpf_core::{Error, ErrorKind, Result};

use crate::config::Config;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "cpf", version, about = "Cavity phase-flip gate design and simulation")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (CSV or report); written atomically.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel evaluation.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Reserved; all computations are deterministic.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reflection coefficients versus detuning.
    Response,
    /// Analytic optimum report and transmittance curves.
    Design,
    /// Gate fidelity for one configuration.
    Fidelity {
        /// Cross-check with the time-domain integrator.
        #[arg(long)]
        oracle: bool,
    },
    /// Parameter sweep to CSV.
    Sweep {
        /// SVG heatmap (two axes) or line plot (one axis).
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Input => EXIT_CONFIG,
        ErrorKind::Numerical => EXIT_NUMERICAL,
        ErrorKind::Io => EXIT_IO,
    }
}

fn load_config(cli: &Cli) -> Result<Config> {
    match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            Config::parse(&text)
        }
        None => Ok(Config::default()),
    }
}

/// Runs the parsed command; `stdout` receives everything not sent to a file.
pub fn run(cli: &Cli, stdout: &mut dyn std::io::Write) -> Result<()> {
    let cfg = load_config(cli)?;
    cpf_core::par::with_threads(cli.threads, || -> Result<Vec<(Option<PathBuf>, String)>> {
        // (destination, text); None goes to stdout
        let mut outputs = Vec::new();
        match &cli.command {
            Command::Response => outputs.push((cli.out.clone(), commands::response_csv(&cfg)?)),
            Command::Design => {
                let (rep, csv) = commands::design(&cfg)?;
                outputs.push((None, rep));
                if cli.out.is_some() {
                    outputs.push((cli.out.clone(), csv));
                }
            }
            Command::Fidelity { oracle } => {
                let rep = commands::fidelity(&cfg, *oracle)?;
                if cli.out.is_some() {
                    outputs.push((cli.out.clone(), rep.clone()));
                }
                outputs.push((None, rep));
            }
            Command::Sweep { svg } => {
                let (_, csv) = commands::sweep(&cfg)?;
                if let Some(path) = svg {
                    outputs.push((Some(path.clone()), commands::sweep_svg(&cfg, &csv)?));
                }
                outputs.push((cli.out.clone(), csv));
            }
        }
        Ok(outputs)
    })?
    .into_iter()
    .try_for_each(|(dest, text)| match dest {
        Some(path) => output::write_atomic(&path, text.as_bytes()),
        None => stdout.write_all(text.as_bytes()).map_err(Error::from),
    })
}
