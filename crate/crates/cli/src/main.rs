use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use esdg::driver::{self, RunConfig};

/// Entropy-stable DG solver for 2D resistive GLM-MHD on periodic meshes.
#[derive(Parser)]
#[command(name = "esdg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write diagnostics.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the `scenario` key.
        #[arg(long)]
        scenario: Option<String>,
        /// Overrides the `output_dir` key.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Errors and orders on a sequence of square meshes.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
        meshes: Vec<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Total entropy change under repeated halving of a fixed step.
    CflStudy {
        #[arg(long)]
        config: PathBuf,
        /// First step size; defaults to the CFL = 1 step of the initial field.
        #[arg(long)]
        dt0: Option<f64>,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Discrete identity checks.
    Verify {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

fn load(path: &PathBuf, scenario: Option<&str>, output: Option<PathBuf>) -> Result<RunConfig, ExitCode> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(1)
    })?;
    let mut cfg = driver::parse_config(&text, scenario).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(1)
    })?;
    if output.is_some() {
        cfg.output_dir = output;
    }
    Ok(cfg)
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, scenario, output } => load(&config, scenario.as_deref(), output).map(|c| driver::cmd_run(&c)),
        Command::Convergence { config, meshes, output } => {
            load(&config, None, output).map(|c| driver::cmd_convergence(&c, &meshes))
        }
        Command::CflStudy { config, dt0, levels, output } => {
            load(&config, None, output).and_then(|c| {
                let dt0 = match dt0 {
                    Some(dt) => dt,
                    None => driver::initial_step(&c, 1.0).map_err(|e| {
                        eprintln!("error: {e}");
                        ExitCode::from(1)
                    })?,
                };
                Ok(driver::cmd_cfl_study(&c, dt0, levels))
            })
        }
        Command::Verify { seed } => Ok(driver::cmd_verify(seed)),
    };
    match result {
        Ok(c) => code(c),
        Err(c) => c,
    }
}
