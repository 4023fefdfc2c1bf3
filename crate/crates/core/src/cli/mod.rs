//! Command-line front end: `run`, `compare`, `replicate-paper` and
//! `estimate-lipschitz`.
//!
//! Exit codes: 0 clean, 1 config or usage error, 2 safety violation,
//! 3 infeasible QP or negative barrier constraint, 4 replication check failed.

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::EXIT_CONFIG;

#[derive(Debug, Parser)]
#[command(name = "cbf-trigger", version, about = "Self-triggered CLF-CBF zero-order-hold control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Config file (sectioned key = value)
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set plant.epsilon=0.5`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory (overrides output.dir)
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Random seed (overrides output.seed)
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one closed-loop run
    Run(Common),
    /// Self-triggered run against periodic runs
    Compare {
        #[command(flatten)]
        common: Common,
        /// Periods, comma separated (defaults to sim.t_p)
        #[arg(long = "t-p", value_delimiter = ',', value_name = "T")]
        t_p: Option<Vec<f64>>,
    },
    /// Reference experiment in both modes with figures and a check report
    ReplicatePaper {
        #[arg(long, value_name = "DIR", default_value = "replication")]
        out: PathBuf,
    },
    /// Sample the closed-loop field and compare against the declared constant
    EstimateLipschitz(Common),
}

fn resolve(common: &Common) -> Result<config::ExperimentConfig, config::ConfigError> {
    let mut overrides = common.set.clone();
    if let Some(seed) = common.seed {
        overrides.push(format!("output.seed={seed}"));
    }
    if let Some(out) = &common.out {
        overrides.push(format!("output.dir={:?}", out.display().to_string()));
    }
    config::load(common.config.as_deref(), &overrides).map(|l| l.config)
}

/// Parses `args` (including the program name) and executes the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::ReplicatePaper { out } => commands::cmd_replicate_paper(out),
        Command::Run(common) | Command::EstimateLipschitz(common) | Command::Compare { common, .. } => {
            let cfg = match resolve(common) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("{e}");
                    return EXIT_CONFIG;
                }
            };
            match &cli.command {
                Command::Run(_) => commands::cmd_run(&cfg, &cfg.output.dir),
                Command::EstimateLipschitz(common) => {
                    commands::cmd_estimate_lipschitz(&cfg, common.out.as_ref())
                }
                Command::Compare { t_p, .. } => {
                    let list = t_p.clone().unwrap_or_else(|| vec![cfg.sim.t_p]);
                    commands::cmd_compare(&cfg, &list, &cfg.output.dir)
                }
                Command::ReplicatePaper { .. } => unreachable!(),
            }
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_CONFIG
        }
    }
}
