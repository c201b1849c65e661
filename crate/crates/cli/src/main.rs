use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pide_lab::commands::{self, ErrorKind};
use pide_lab::config::RunConfig;
use pide_lab::CliError;

#[derive(Parser)]
#[command(
    name = "pide-lab",
    about = "Semi-discrete approximation experiments for a 1D parabolic PIDE with boundary input"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grid-refinement convergence study against the reference grid
    Converge {
        #[arg(long)]
        config: PathBuf,
        /// Error measure: cross-grid L2 or restricted sup norm
        #[arg(long, value_enum)]
        kind: Kind,
    },
    /// Certify the consistency, analyticity, growth and Sobolev properties
    Properties {
        #[arg(long)]
        config: PathBuf,
    },
    /// Simulate a single grid size and emit CSV plus a heat-map SVG
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        n: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    L2,
    Inf,
}

impl From<Kind> for ErrorKind {
    fn from(kind: Kind) -> Self {
        match kind {
            Kind::L2 => ErrorKind::L2,
            Kind::Inf => ErrorKind::Inf,
        }
    }
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Converge { config, kind } => {
            let config = RunConfig::load(&config)?;
            let report = commands::cmd_converge(&config, kind.into())?;
            for (n, err) in &report.rows {
                println!("n={n:4}  e_n({}) = {err:.6e}", report.kind.name());
            }
            println!(
                "wrote {} and {}",
                config.out_dir.join("converge.csv").display(),
                config.out_dir.join("converge.svg").display()
            );
        }
        Command::Properties { config } => {
            let config = RunConfig::load(&config)?;
            let reports = commands::cmd_properties(&config)?;
            for report in &reports {
                let fitted: Vec<String> = report
                    .fitted
                    .iter()
                    .map(|(k, v)| format!("{k}={v:.4e}"))
                    .collect();
                println!(
                    "{:16} {}  [{}]",
                    report.property,
                    if report.pass { "pass" } else { "FAIL" },
                    fitted.join(", ")
                );
            }
            println!(
                "wrote {}",
                config.out_dir.join("properties.csv").display()
            );
        }
        Command::Simulate { config, n } => {
            let config = RunConfig::load(&config)?;
            commands::cmd_simulate(&config, n)?;
            println!(
                "wrote {} and {}",
                config.out_dir.join(format!("trajectory_n{n}.csv")).display(),
                config.out_dir.join(format!("surface_n{n}.svg")).display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}
