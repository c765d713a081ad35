use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gvi_cli::{config_hash, load, run_experiment, write_outputs, CliError, Manifest};

#[derive(Parser)]
#[command(name = "gvi", version, about = "Generalized variational inference experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write CSV + manifest outputs.
    Run {
        /// Path to a TOML (or JSON) experiment config.
        config: PathBuf,
        /// Output directory (overrides the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base seed (overrides the config's `seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for replicates; the GVI_JOBS env var overrides.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Check a config against the schema without running it.
    Validate { config: PathBuf },
    /// List the available experiments.
    ListExperiments,
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn dispatch() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config: path,
            out,
            seed,
            jobs,
        } => {
            let raw = std::fs::read(&path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let mut config = load(&path)?;
            let errors = config.validate();
            if !errors.is_empty() {
                return Err(CliError::Config(errors.join("; ")));
            }
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let jobs = std::env::var("GVI_JOBS")
                .ok()
                .and_then(|v| v.parse::<usize>().ok())
                .unwrap_or(jobs);
            let rows = run_experiment(&config, jobs)?;
            let out_dir = out
                .or_else(|| config.output.clone().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("results"));
            let stem = format!("{}-{}", config.experiment.name(), config.seed);
            let manifest = Manifest {
                schema_version: config.schema_version,
                experiment: config.experiment.name().to_string(),
                seed: config.seed,
                config_sha256: config_hash(&raw),
                build_version: env!("CARGO_PKG_VERSION").to_string(),
                rows: rows.len(),
            };
            write_outputs(&out_dir, &stem, &rows, &manifest)?;
            println!(
                "wrote {} rows to {}",
                rows.len(),
                out_dir.join(format!("{stem}.csv")).display()
            );
            Ok(())
        }
        Command::Validate { config: path } => {
            let config = load(&path)?;
            let errors = config.validate();
            if errors.is_empty() {
                println!("ok");
                Ok(())
            } else {
                Err(CliError::Config(errors.join("; ")))
            }
        }
        Command::ListExperiments => {
            for kind in gvi_cli::ExperimentKind::all() {
                println!("{:<22} {}", kind.name(), kind.description());
            }
            Ok(())
        }
    }
}
