use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod seed;

/// Simulate distributed dual-multiplier monitoring with gossip consensus.
///
/// Log verbosity is read from `GOSSIP_DUAL_LOG` (error, warn, info, debug).
#[derive(Parser, Debug)]
#[command(name = "gossip-dual", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a config and print the feasibility condition check.
    Check { config: PathBuf },
    /// Run one experiment and write its artifacts.
    Run {
        config: PathBuf,
        /// Output directory; defaults to `[run] output_dir`, then `out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also log every gossip message, hex-encoded.
        #[arg(long)]
        trace_messages: bool,
        /// Feasibility tolerance on `average >= c_m - tolerance`.
        #[arg(long, default_value_t = 0.02)]
        tolerance: f64,
    },
    /// Run one experiment per value of a numeric parameter.
    Sweep {
        config: PathBuf,
        /// One of eta, t_zero, p_up.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0.02)]
        tolerance: f64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GOSSIP_DUAL_LOG", "warn"))
        .format_timestamp(None)
        .init();

    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check { config } => commands::check(&config),
        Command::Run {
            config,
            out,
            trace_messages,
            tolerance,
        } => commands::run(&config, out, trace_messages, tolerance),
        Command::Sweep {
            config,
            param,
            values,
            out,
            tolerance,
        } => commands::sweep(&config, &param, &values, out, tolerance),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
