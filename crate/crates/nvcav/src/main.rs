use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nvcav::commands::{self, Context};
use nvcav::config::RunConfig;
use nvcav::{help, CliError};

#[derive(Parser)]
#[command(name = "nvcav", version, about = "Dielectric-loaded cavity and NV spin simulator", after_help = help::EXIT_CODES)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for synthetic noise; overrides seeds in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the TE0 modes of the configured cavity.
    #[command(after_help = help::modes())]
    Modes,
    /// Frequency of one mode versus plunger insertion.
    #[command(after_help = help::tune())]
    Tune,
    /// Magnetic field on planes below the cavity.
    #[command(after_help = help::fieldmap())]
    Fieldmap,
    /// Synthesize and/or fit an ODMR spectrum.
    #[command(after_help = help::odmr())]
    Odmr,
    /// ODMR contrast along a line below the cavity.
    #[command(after_help = help::scan())]
    Scan,
    /// Recover the NV axis from three-point contrasts.
    #[command(name = "invert-axis", after_help = help::invert())]
    InvertAxis,
    /// Fit geometry parameters to target mode frequencies.
    #[command(after_help = help::calibrate())]
    Calibrate,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let cfg = RunConfig::load(path)?;
    let ctx = Context {
        seed: cli.seed,
        jobs: cli.jobs,
        config_dir: path.parent().map(PathBuf::from).unwrap_or_default(),
    };
    let report = match cli.command {
        Command::Modes => commands::modes(&cfg)?,
        Command::Tune => commands::tune(&cfg, &ctx)?,
        Command::Fieldmap => commands::fieldmap(&cfg)?,
        Command::Odmr => commands::odmr(&cfg, &ctx)?,
        Command::Scan => commands::scan(&cfg)?,
        Command::InvertAxis => commands::invert_axis(&cfg, &ctx)?,
        Command::Calibrate => commands::calibrate(&cfg)?,
    };
    let dir = commands::output_dir(cli.out.as_deref(), &cfg, &ctx);
    for line in &report.summary {
        println!("{line}");
    }
    for path in report.outputs.commit(&dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
