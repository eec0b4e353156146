use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ecoforecast_cli::{cmd_generate_data, cmd_report, cmd_run, cmd_sweep_timesteps, ExperimentConfig, ResultsBundle};

#[derive(Parser)]
#[command(name = "ecoforecast", version, about = "Forecasting and sustainability benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run a single seed (overrides `seeds`).
    #[arg(long)]
    seed: Option<u64>,
    /// Concurrent grid cells (overrides `workers`).
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn load(&self) -> ecoforecast_cli::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write one CSV per synthetic station.
    GenerateData(Common),
    /// Train and score the whole grid; writes results.json.
    Run(Common),
    /// Spiking models only; writes timestep_sweep.csv.
    SweepTimesteps(Common),
    /// Tables and plot data from an existing results.json.
    Report {
        /// Bundle written by `run`.
        #[arg(long)]
        bundle: PathBuf,
        /// Output directory (defaults to the bundle's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn report_failures(bundle: &ResultsBundle) -> ExitCode {
    for f in &bundle.failures {
        eprintln!("cell {:?} failed: {}", f.cell, f.error);
    }
    if bundle.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenerateData(c) => c.load().and_then(|cfg| cmd_generate_data(&cfg)).map(|paths| {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }),
        Command::Run(c) => c.load().and_then(|cfg| cmd_run(&cfg)).map(|b| {
            println!("{} runs, {} failures", b.runs.len(), b.failures.len());
            report_failures(&b)
        }),
        Command::SweepTimesteps(c) => c.load().and_then(|cfg| cmd_sweep_timesteps(&cfg)).map(|b| report_failures(&b)),
        Command::Report { bundle, out } => ResultsBundle::load(&bundle).and_then(|b| {
            let dir = out.unwrap_or_else(|| bundle.parent().map(PathBuf::from).unwrap_or_default());
            let files = cmd_report(&b, &dir)?;
            for n in &files.notices {
                eprintln!("{n}");
            }
            Ok(ExitCode::SUCCESS)
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}
