//! `aerocap`: single guided runs, Monte Carlo campaigns and switching-function
//! checks.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 run completed without capture.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use aerocap::guidance::Algorithm;
use aerocap::montecarlo::EntrySet;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aerocap", version, about = "Uranus aerocapture guidance simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Directory of optional TOML files (planet, aero, vehicle, mission, guidance, plant, dispersion).
    #[arg(long)]
    config: Option<PathBuf>,
    /// abamguid_plus, abamguid, fnpag or casm_only; overrides the guidance file.
    #[arg(long)]
    algo: Option<Algorithm>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Fly one trajectory and write its trace, guidance log and summary.
    Single {
        #[command(flatten)]
        common: Common,
        /// Inertial entry flight-path angle [deg]; overrides the mission file.
        #[arg(long, allow_hyphen_values = true)]
        efpa: Option<f64>,
        /// Plant steps between trace rows.
        #[arg(long, default_value_t = 10)]
        trace_every: usize,
    },
    /// Run a dispersed campaign and write per-run records and statistics.
    Campaign {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Master seed; overrides the dispersion file.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Entry flight-path angle spread; overrides the dispersion file.
        #[arg(long)]
        entry_set: Option<EntrySet>,
    },
    /// Evaluate the switching functions along a state/costate CSV.
    VerifySwitching {
        /// CSV with columns t, r, V, gamma, lambda_r, lambda_V, lambda_gamma and optionally alpha, u1.
        costates: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write the nominal configuration files to a directory.
    WriteConfig { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AEROCAP_LOG", "warn")).init();

    let result = match cli.command {
        Command::Single { common, efpa, trace_every } => {
            commands::single(common.config.as_deref(), common.algo, efpa, trace_every, &common.out)
        }
        Command::Campaign { common, n, seed, jobs, entry_set } => commands::campaign(
            common.config.as_deref(),
            common.algo,
            commands::CampaignArgs { n, seed, jobs, entry_set },
            &common.out,
        ),
        Command::VerifySwitching { costates, config, out } => {
            commands::verify_switching(&costates, config.as_deref(), &out)
        }
        Command::WriteConfig { dir } => commands::write_config(&dir),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
