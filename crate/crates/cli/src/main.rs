//! Batch front end. Reads a TOML run configuration, applies flag overrides,
//! runs one pipeline, and signals the outcome through the exit code:
//! 0 completed, 2 inconclusive verdicts present, 3 failure.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use wavejunction_core::config::RunConfig;
use wavejunction_core::pipelines::{
    cmd_absence, cmd_cross_section, cmd_detect, cmd_export_mesh, cmd_param_sweep, RunStatus,
};

#[derive(Parser)]
#[command(
    name = "wavejunction",
    version,
    about = "Threshold analysis of planar waveguide junctions"
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory; overrides the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Random seed; overrides the config.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Refinement levels; overrides the config.
    #[arg(long, global = true, value_name = "L")]
    refine: Option<usize>,

    /// Modes kept per outlet; overrides the config.
    #[arg(long, global = true, value_name = "P")]
    modes: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Outlet spectra, the threshold, and its multiplicity.
    CrossSection,
    /// Truncated mixed eigenvalue sweep and the absence verdict.
    Absence,
    /// Threshold scattering matrix and bounded-solution counts.
    Detect,
    /// Track s eigenvalue phases over a geometry knob.
    ParamSweep,
    /// Write the computational mesh as VTK.
    ExportMesh,
}

fn load(cli: &Cli) -> wavejunction_core::Result<RunConfig> {
    let path = cli.config.as_deref().ok_or_else(|| {
        wavejunction_core::Error::Config("--config PATH is required".into())
    })?;
    let mut cfg = RunConfig::from_path(path)?;
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(refine) = cli.refine {
        if refine == 0 {
            return Err(wavejunction_core::Error::Config("--refine must be >= 1".into()));
        }
        cfg.refine = refine;
    }
    if let Some(modes) = cli.modes {
        if modes == 0 {
            return Err(wavejunction_core::Error::Config("--modes must be >= 1".into()));
        }
        cfg.p_modes = modes;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> wavejunction_core::Result<RunStatus> {
    let cfg = load(cli)?;
    match cli.command {
        Command::CrossSection => cmd_cross_section(&cfg),
        Command::Absence => cmd_absence(&cfg),
        Command::Detect => cmd_detect(&cfg),
        Command::ParamSweep => cmd_param_sweep(&cfg),
        Command::ExportMesh => cmd_export_mesh(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(RunStatus::Completed) => ExitCode::from(0),
        Ok(RunStatus::Inconclusive) => {
            log::warn!("run finished with inconclusive verdicts");
            ExitCode::from(2)
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(3)
        }
    }
}
