//! `vdw-otoc`: solve bound states, compute OTOCs and fit their growth.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vdw_otoc::config::{RunConfig, StateSelection};
use vdw_otoc::pipeline::{Pipeline, PipelineError};

#[derive(Parser)]
#[command(name = "vdw-otoc", version, about = "OTOC sensitivity analysis for diatomic bound states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for bound states; writes spectrum.csv and elements.json.
    Solve(Common),
    /// Compute C_n(t) for the reported states; writes otoc.csv.
    Otoc {
        #[command(flatten)]
        common: Common,
        /// Fail instead of re-solving when solve artifacts are missing.
        #[arg(long)]
        no_recompute: bool,
    },
    /// Fit growth windows on an existing otoc.csv; writes sensitivity.json.
    Fit(Common),
    /// Run every stage.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Artifact directory, overriding output.directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// States to analyse, overriding otoc.states.
    #[arg(long = "state", num_args = 1..)]
    states: Vec<usize>,
    /// Minimum R² of a growth window, overriding fit.r2_min.
    #[arg(long)]
    r2_min: Option<f64>,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "VDW_OTOC_THREADS", default_value_t = 0)]
    threads: usize,
}

impl Common {
    fn pipeline(&self) -> Result<Pipeline, PipelineError> {
        let mut config = RunConfig::from_path(&self.config)?;
        if let Some(out) = &self.out {
            config.output.directory = out.clone();
        }
        if !self.states.is_empty() {
            config.otoc.states = StateSelection::List(self.states.clone());
        }
        if let Some(r2) = self.r2_min {
            config.fit.r2_min = r2;
        }
        Pipeline::new(config, self.threads)
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Solve(c) => c.pipeline()?.solve(),
        Command::Otoc { common, no_recompute } => common.pipeline()?.otoc(!no_recompute),
        Command::Fit(c) => c.pipeline()?.fit().map(drop),
        Command::Report(c) => c.pipeline()?.report().map(drop),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vdw-otoc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
