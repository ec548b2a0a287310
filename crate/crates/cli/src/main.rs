use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use urnsim_cli::commands::{self, CmdError, EXIT_INVALID};
use urnsim_cli::config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "urnsim",
    about = "Simulate and verify generalized urn processes on finite state spaces",
    version
)]
struct Cli {
    /// Suppress progress output (files and JSON are still written).
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sweep and write trajectory CSVs plus a summary.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seed list, overriding the config.
        #[arg(long)]
        seeds: Option<String>,
        /// Inclusive seed range N..M, overriding the config.
        #[arg(long, conflicts_with = "seeds")]
        seed_range: Option<String>,
        /// Output directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Snapshot stride, overriding the config.
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Enumerate and print the fixed points of the configured map.
    FixedPoints {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check conditions A1, A2, A3 for the configured experiment.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Replay trajectory files against drift bounds and convergence.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        /// Trajectory CSV files produced by `simulate`.
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Print the fully populated default configuration.
    PrintDefaults,
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, CmdError> {
    ExperimentConfig::from_file(path)
        .map_err(|e| CmdError::Invalid(format!("{}: {e}", path.display())))
}

fn dispatch(cli: Cli) -> Result<i32, CmdError> {
    match cli.command {
        Command::Simulate {
            config,
            seeds,
            seed_range,
            out,
            stride,
        } => {
            let mut config = load(&config)?;
            commands::apply_overrides(
                &mut config,
                seeds.as_deref(),
                seed_range.as_deref(),
                out.as_deref(),
                stride,
            )?;
            commands::cmd_simulate(&config, cli.quiet)
        }
        Command::FixedPoints { config } => commands::cmd_fixed_points(&load(&config)?),
        Command::Verify { config } => commands::cmd_verify(&load(&config)?, cli.quiet),
        Command::Diagnose { config, files } => {
            commands::cmd_diagnose(&load(&config)?, &files, cli.quiet)
        }
        Command::PrintDefaults => Ok(commands::cmd_print_defaults()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with exit code 0.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(EXIT_INVALID as u8);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
