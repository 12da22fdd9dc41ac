use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use interface_lab::{
    run, validate, CliError, ExperimentConfig, ExperimentKind, OUTPUT_ENV, THREADS_ENV,
};

#[derive(Parser)]
#[command(
    name = "interface-lab",
    version,
    about = "Run lattice interface-model experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its report and data files.
    Run { config: PathBuf },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// List the available experiments.
    ListExperiments,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        CliError::Config(format!(
            "{THREADS_ENV} must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn execute(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::ListExperiments => {
            for kind in ExperimentKind::ALL {
                println!("{:<18} {}", kind.name(), kind.summary());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let diags = validate(&cfg);
            if diags.is_empty() {
                println!("ok");
                return Ok(ExitCode::SUCCESS);
            }
            for d in &diags {
                println!("{d}");
            }
            Ok(ExitCode::from(3))
        }
        Command::Run { config } => {
            configure_threads()?;
            let cfg = ExperimentConfig::load(&config)?;
            let root = std::env::var_os(OUTPUT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("."));
            let outcome = run(&cfg, &root)?;
            for c in &outcome.report.checks {
                let verdict = if c.passed { "PASS" } else { "FAIL" };
                println!(
                    "{verdict} {}: {:.6e} (threshold {:.6e})",
                    c.name, c.observed, c.threshold
                );
            }
            println!("wrote {}", outcome.output_dir.display());
            Ok(if outcome.report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
