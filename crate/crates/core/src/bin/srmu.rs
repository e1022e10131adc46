//! Command-line front end for the device-health memory experiments.
//!
//! ```text
//! srmu run --experiment exp3 --trials 1000 --workers 8 --out-dir results
//! srmu validate-config --config my_experiment.toml
//! srmu oracle-dump --experiment exp1 --trial 3 --out-dir dumps
//! ```
//!
//! Failures exit with status 1 and print one JSON line to stderr:
//! `{"error":"<kind>","message":"<text>"}`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use srmu::bench::{run_experiment, write_oracle_dump, write_report, ExperimentOverrides, ExperimentSpec};
use srmu::memory::ModelSpec;
use srmu::Result;

#[derive(Parser)]
#[command(name = "srmu", version, about = "Relevance-gated hyperdimensional memory experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write curves, summary and manifest files.
    Run(RunArgs),
    /// Resolve preset + config file + flags, validate, and print the result as JSON.
    ValidateConfig(ExperimentArgs),
    /// Replay one trial and write its event log, codebook and memory snapshots.
    OracleDump(DumpArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Preset to start from: exp1, exp2 or exp3.
    #[arg(long)]
    experiment: Option<String>,
    /// TOML or JSON file whose fields override the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    /// Decays to compare, e.g. `1.0,0.95`; builds naive + temporal(γ<1) + srmu(γ).
    #[arg(long, value_delimiter = ',')]
    gamma_list: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Encode every trial with the same codebook.
    #[arg(long)]
    shared_codebook: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[arg(long, default_value_t = 0)]
    trial: usize,
    #[arg(long, default_value = "oracle")]
    out_dir: PathBuf,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentSpec> {
        let overrides = match &self.config {
            Some(path) => ExperimentOverrides::from_path(path)?,
            None => ExperimentOverrides::default(),
        };
        let base = self
            .experiment
            .clone()
            .or_else(|| overrides.experiment.clone())
            .unwrap_or_else(|| "exp1".to_string());
        let mut spec = srmu::bench::preset(&base)?;
        overrides.apply(&mut spec);
        if self.experiment.is_some() && overrides.name.is_none() {
            spec.name = base;
        }
        if let Some(trials) = self.trials {
            spec.trials = trials;
        }
        if let Some(steps) = self.steps {
            spec.env.steps = steps;
        }
        if let Some(dim) = self.dim {
            spec.dim = dim;
        }
        if let Some(gammas) = &self.gamma_list {
            spec.models = ModelSpec::roster(gammas);
        }
        if let Some(seed) = self.seed {
            spec.master_seed = seed;
        }
        if self.shared_codebook {
            spec.shared_codebook = true;
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, usize::from)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let spec = args.experiment.resolve()?;
            let workers = args.workers.unwrap_or_else(default_workers);
            let result = run_experiment(&spec, workers)?;
            let paths = write_report(&spec, &result, workers, &args.out_dir)?;
            println!(
                "{:<16} {:>10} {:>9} {:>12} {:>9}",
                "model", "cosine", "±se", "magnitude", "±se"
            );
            for m in &result.models {
                println!(
                    "{:<16} {:>10.4} {:>9.4} {:>12.2} {:>9.2}",
                    m.model.label(),
                    m.final_cosine,
                    m.se_cosine,
                    m.final_magnitude,
                    m.se_magnitude
                );
            }
            println!("wrote {}", paths.summary.display());
            println!("wrote {}", paths.curves.display());
            println!("wrote {}", paths.manifest.display());
        }
        Command::ValidateConfig(args) => {
            let spec = args.resolve()?;
            println!("{}", serde_json::to_string_pretty(&spec)?);
        }
        Command::OracleDump(args) => {
            let spec = args.experiment.resolve()?;
            if args.trial >= spec.trials {
                return Err(srmu::Error::InvalidConfig(format!(
                    "trial {} outside 0..{}",
                    args.trial, spec.trials
                )));
            }
            let dump = write_oracle_dump(&spec, args.trial, &args.out_dir)?;
            println!("{}", serde_json::to_string_pretty(&dump)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
