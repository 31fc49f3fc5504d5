use clap::{Parser, Subcommand};
use elastoscope::config::{ExperimentConfig, Pipeline};
use elastoscope::pipeline::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "elastoscope", version, about = "Shear modulus imaging experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a JSON config file.
    Run {
        /// Path to the experiment configuration.
        config: PathBuf,
        /// Output directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Random seed, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare finished runs on the same phantom and grid.
    Compare {
        /// Run directories, each holding a manifest.json.
        #[arg(num_args = 2..)]
        dirs: Vec<PathBuf>,
    },
    /// Check the adjoint gradient against finite differences.
    GradientCheck {
        /// Path to the experiment configuration.
        config: PathBuf,
        /// Output directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Random seed, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn apply_thread_cap() -> Result<(), CliError> {
    match std::env::var("ELASTOSCOPE_THREADS") {
        Err(_) => Ok(()),
        Ok(raw) => match raw.parse::<usize>() {
            Ok(n) if n >= 1 => {
                elastoscope_core::linsys::set_solver_threads(n);
                Ok(())
            }
            _ => Err(CliError::Config(format!(
                "ELASTOSCOPE_THREADS must be a positive integer, got {raw:?}"
            ))),
        },
    }
}

fn run_command(
    config: &PathBuf,
    out: Option<&PathBuf>,
    seed: Option<u64>,
    force_pipeline: Option<Pipeline>,
) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::from_path(config)?;
    if let Some(p) = force_pipeline {
        cfg.pipeline = p;
    }
    let manifest = elastoscope::run(&cfg, out.map(|p| p.as_path()), seed)?;
    println!(
        "wrote {}",
        cfg_output(&cfg, out).join("manifest.json").display()
    );
    for key in [
        "err_mu_final",
        "err_eta_final",
        "err_mu",
        "err_eta",
        "j_initial",
        "j_final",
        "max_rel_error",
        "continuity_residual",
    ] {
        if let Some(v) = manifest.metric(key) {
            println!("{key} = {v:.6e}");
        }
    }
    Ok(())
}

fn cfg_output(cfg: &ExperimentConfig, out: Option<&PathBuf>) -> PathBuf {
    out.cloned().unwrap_or_else(|| cfg.output_dir.clone())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = apply_thread_cap().and_then(|()| match &cli.command {
        Command::Run { config, out, seed } => run_command(config, out.as_ref(), *seed, None),
        Command::GradientCheck { config, out, seed } => {
            run_command(config, out.as_ref(), *seed, Some(Pipeline::GradientCheck))
        }
        Command::Compare { dirs } => {
            let table = elastoscope::compare(dirs)?;
            print!("{table}");
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
