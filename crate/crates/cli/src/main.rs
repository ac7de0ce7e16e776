use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nmd_cli::{parse_value, resolve_out_dir, run, sweep, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "nmd", version, about = "Run configured two-state molecular dynamics and Schrödinger experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the master seed of the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the config once per value of one leaf field.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted field path, e.g. `potential.a.0`.
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("NMD_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|n| *n > 0) {
        // only fails if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { config, out, seed } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let dir = resolve_out_dir(&cfg, out.as_deref());
            let (manifest, _) = run(&cfg, &dir)?;
            println!("{}", dir.join(nmd_cli::RunManifest::FILE_NAME).display());
            eprintln!("{} run finished: {} files, config {}", manifest.kind, manifest.files.len(), &manifest.config_hash[..12]);
            Ok(())
        }
        Command::Sweep { config, axis, values, out, parallelism } => {
            let cfg = ExperimentConfig::load(&config)?;
            cfg.validate()?;
            if parallelism == 0 {
                return Err(CliError::validation("parallelism must be at least 1"));
            }
            let values: Vec<toml::Value> = values.iter().map(|v| parse_value(v)).collect();
            let dir = resolve_out_dir(&cfg, out.as_deref());
            let report = sweep(&cfg, &axis, &values, parallelism, &dir)?;
            println!("{}", dir.join(nmd_cli::runner::SUMMARY_FILE).display());
            match report.failed() {
                0 => Ok(()),
                failed => Err(CliError::SweepFailed { failed, total: report.rows.len() }),
            }
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            cfg.validate()?;
            println!("{}", serde_json::json!({ "valid": true, "kind": cfg.experiment.kind(), "config_hash": cfg.hash() }));
            Ok(())
        }
    }
}
