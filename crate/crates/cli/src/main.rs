use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Debug, Parser)]
#[command(
    name = "incentives",
    version,
    about = "Personalized incentive design for weight-loss programs"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration; omitted keys keep their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Suppress progress messages.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MipKind {
    Smle,
    Incentive,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MipFormat {
    Lp,
    Mps,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic cohort.
    GenCohort {
        /// Participants; defaults to the configured cohort size.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Estimate initial conditions for every participant in an observation file.
    Fit {
        #[arg(long)]
        obs: PathBuf,
        /// Cohort file supplying per-participant traits.
        #[arg(long)]
        cohort: Option<PathBuf>,
    },
    /// Forecast final weights from point estimates.
    Predict {
        /// Estimates written by `fit`.
        #[arg(long)]
        estimates: PathBuf,
        /// Observation file whose rewards form the history.
        #[arg(long)]
        obs: Option<PathBuf>,
        #[arg(long)]
        cohort: Option<PathBuf>,
        /// Forecast horizon in weeks.
        #[arg(long, default_value_t = 24)]
        weeks: usize,
    },
    /// Plan the remaining weeks' incentives under a budget.
    Optimize {
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        cohort: Option<PathBuf>,
        #[arg(long)]
        budget: f64,
        /// Amount already disbursed.
        #[arg(long, default_value_t = 0.0)]
        spent: f64,
    },
    /// Run one simulated trial.
    Simulate {
        /// Cohort file; drawn from the configuration when omitted.
        #[arg(long)]
        cohort: Option<PathBuf>,
        /// `fixed` or `dia-<indicator|hinge>-q<q>`.
        #[arg(long, default_value = "dia-hinge-q1.00")]
        policy: String,
        #[arg(long)]
        budget: f64,
        #[arg(long, default_value_t = 0)]
        replicate: usize,
    },
    /// Cross every configured policy, budget and replicate.
    Sweep {
        #[arg(long)]
        cohort: Option<PathBuf>,
    },
    /// Write an estimation or incentive MIP in LP or MPS text.
    ExportMip {
        #[arg(long, default_value_t = 2)]
        weeks: usize,
        #[arg(long, value_enum, default_value_t = MipKind::Smle)]
        kind: MipKind,
        #[arg(long, value_enum, default_value_t = MipFormat::Lp)]
        format: MipFormat,
        /// Observation file; planted synthetic data when omitted.
        #[arg(long)]
        obs: Option<PathBuf>,
        /// Participant to export; the first one when omitted.
        #[arg(long)]
        participant: Option<String>,
        #[arg(long, default_value_t = 100.0)]
        budget: f64,
    },
    /// Evaluate the surrogate likelihood sandwich at one point.
    BoundCheck {
        #[arg(long)]
        p: f64,
        /// Recording outcome, 0 or 1.
        #[arg(long)]
        g: u8,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
    },
}

pub struct Log {
    quiet: bool,
    color: bool,
}

impl Log {
    fn new(quiet: bool) -> Self {
        let color = std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty())
            && std::io::stderr().is_terminal();
        Log { quiet, color }
    }

    pub fn info(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    /// Printed even when quiet.
    pub fn warn(&self, msg: &str) {
        if self.color {
            eprintln!("\x1b[33mwarning:\x1b[0m {msg}");
        } else {
            eprintln!("warning: {msg}");
        }
    }

    fn error(&self, msg: &str) {
        if self.color {
            eprintln!("\x1b[31merror:\x1b[0m {msg}");
        } else {
            eprintln!("error: {msg}");
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let log = Log::new(cli.common.quiet);
    match commands::run(&cli, &log) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log.error(&format!("{e:#}"));
            ExitCode::from(1)
        }
    }
}
