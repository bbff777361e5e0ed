//! `charflow`: runs scenarios through the front-tracking solver and its
//! diagnostics and writes CSV/JSON artifacts.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use charflow_core::Error as CoreError;

#[derive(Debug, Parser)]
#[command(name = "charflow", version, about = "Front tracking for scalar conservation laws")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
    /// Scenario JSON file; `verify` accepts several.
    #[arg(long, global = true)]
    pub scenario: Vec<PathBuf>,
    /// Overrides the scenario horizon.
    #[arg(long, global = true)]
    pub until: Option<f64>,
    /// Overrides the scenario grid exponent.
    #[arg(long, global = true)]
    pub k: Option<u32>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for the random test functions of `verify`; falls back to
    /// CHARFLOW_SEED, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for `verify` and `counterexample2`.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Front-track a scenario: fronts.csv, events.csv, samples.csv, summary.json.
    Solve {
        /// Sample times; defaults to five evenly spaced times up to the horizon.
        #[arg(long, value_delimiter = ',')]
        times: Vec<f64>,
    },
    /// Print the wave fan of a Riemann problem as (speed, u_before, u_after).
    Riemann {
        #[arg(long, allow_hyphen_values = true)]
        ul: f64,
        #[arg(long, allow_hyphen_values = true)]
        ur: f64,
        /// Used when no scenario is given.
        #[arg(long, value_enum, default_value_t = FluxKind::Burgers)]
        flux: FluxKind,
    },
    /// Boundary Riemann problem in a channel: (t, x, u, v) grid.
    Channel {
        /// Left boundary as `t:x,t:x,...` starting at t = 0.
        #[arg(long, allow_hyphen_values = true)]
        gamma1: String,
        /// Right boundary, same format.
        #[arg(long, allow_hyphen_values = true)]
        gamma2: String,
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        #[arg(long, value_enum, default_value_t = FluxKind::Burgers)]
        flux: FluxKind,
        #[arg(long, default_value_t = 32)]
        nt: usize,
        #[arg(long, default_value_t = 64)]
        nx: usize,
    },
    /// Boundary characteristic family: curves.csv (y, t, x, w, T).
    Characteristics {
        /// Number of straight characteristics spread over the window.
        #[arg(long, default_value_t = 64)]
        y_grid: usize,
        /// Front curves per grid cell of each front's range.
        #[arg(long, default_value_t = 1)]
        w_resolution: usize,
    },
    /// Region labels of the points listed in a `t,x` CSV file: labels.csv.
    Classify {
        #[arg(long)]
        points: PathBuf,
        #[arg(long, default_value_t = 64)]
        y_grid: usize,
        #[arg(long, default_value_t = 1)]
        w_resolution: usize,
    },
    /// Dissipation atoms of one entropy pair: atoms.csv.
    Dissipation {
        /// `kruzkov:+:k`, `kruzkov:-:k` or `quadratic`.
        #[arg(long)]
        entropy: String,
    },
    /// Lax-Oleinik solution of Burgers: oracle.csv (x, u).
    Oracle {
        /// `cantor:n`, `block:n` or `indicator:lo:hi:v`.
        #[arg(long)]
        datum: String,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 4096)]
        grid: usize,
    },
    /// Density criteria on the Cantor construction: criterion.csv.
    Counterexample1 {
        #[arg(long, default_value_t = 8)]
        levels: u32,
        /// Cantor level of the sample points for the pass fractions.
        #[arg(long)]
        sample_level: Option<u32>,
        #[arg(long, default_value_t = 1)]
        per_component: u32,
    },
    /// Bump-flux blocks: blocks.csv and series.json.
    Counterexample2 {
        /// Inclusive range `a..b` or a single block.
        #[arg(long, default_value = "1..3")]
        blocks: String,
        #[arg(long, default_value_t = 10_000)]
        series_terms: u32,
    },
    /// Run verification checks over one or more scenarios.
    Verify {
        #[arg(value_enum, default_value_t = Check::All)]
        check: Check,
        #[arg(long, default_value_t = 50)]
        bumps: usize,
        #[arg(long, default_value_t = 10)]
        pairs: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FluxKind {
    Burgers,
    Cubic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Check {
    All,
    Conservation,
    Admissibility,
    Concentration,
    Trace,
    Contraction,
    Oracle,
}

/// Outcome of a command that ran to completion.
pub enum Outcome {
    Ok,
    ChecksFailed,
}

fn is_input_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        matches!(
            c.downcast_ref::<CoreError>(),
            Some(CoreError::InvalidInput(_) | CoreError::InvalidInterval { .. } | CoreError::OffGrid { .. } | CoreError::Domain(_))
        )
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => {
            eprintln!("verification failed; see summary.json");
            ExitCode::from(1)
        }
        Err(e) if is_input_error(&e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            let path = output::write_dump(&cli, &e);
            match path {
                Ok(p) => eprintln!("internal error: {e:#}\ndiagnostic dump: {}", p.display()),
                Err(d) => eprintln!("internal error: {e:#}\n(could not write diagnostic dump: {d})"),
            }
            ExitCode::from(3)
        }
    }
}
