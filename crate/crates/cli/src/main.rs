//! `delaypred`: simulate, certify and inspect predictor feedback for input-delay systems.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "delaypred", version, about = "Predictor feedback for systems with input delay")]
struct Cli {
    #[command(flatten)]
    globals: Globals,
    #[command(subcommand)]
    command: Command,
}

/// Flags that override the configuration file.
#[derive(Args, Debug, Clone)]
pub struct Globals {
    /// Integration step; must divide the delay.
    #[arg(long, global = true)]
    pub h: Option<f64>,
    /// Seed for random initial data and hypothesis spot checks.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file for CSV (defaults to standard output).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the configured closed loop and fit its decay.
    Simulate {
        config: PathBuf,
        /// Fraction of the horizon discarded before the decay fit.
        #[arg(long, default_value_t = delaypred::closedloop::DEFAULT_SKIP)]
        skip: f64,
    },
    /// Evaluate every applicable stability certificate.
    Certify { config: PathBuf },
    /// Tabulate the certified delay bound over a parameter sweep.
    Rmax {
        config: PathBuf,
        /// Certificate name, e.g. `scalar-4.4`.
        #[arg(long)]
        certificate: String,
        /// Iteration counts, as `a..b` or a comma list.
        #[arg(long)]
        l: Option<String>,
        /// Subinterval counts, as `a..b` or a comma list.
        #[arg(long)]
        q: Option<String>,
        /// Controller gains μ, as a comma list.
        #[arg(long)]
        mu: Option<String>,
    },
    /// Evaluate the predictor at one state and input history next to an ODE oracle.
    Predict {
        config: PathBuf,
        /// State, as a comma list.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        /// CSV with header `theta,u_1..u_m`, equally spaced from `-r` to `0`.
        #[arg(long)]
        history: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate { config, skip } => commands::simulate(&config, &cli.globals, skip),
        Command::Certify { config } => commands::certify(&config, &cli.globals),
        Command::Rmax {
            config,
            certificate,
            l,
            q,
            mu,
        } => commands::rmax(&config, &cli.globals, &certificate, l.as_deref(), q.as_deref(), mu.as_deref()),
        Command::Predict { config, x, history } => commands::predict(&config, &cli.globals, &x, history.as_deref()),
    };
    match outcome {
        Ok(code) => code.into(),
        Err(e) => {
            eprintln!("{e}");
            e.exit_code().into()
        }
    }
}
