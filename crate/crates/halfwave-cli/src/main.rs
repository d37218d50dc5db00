mod config;
mod error;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{error::ErrorKind, Parser, Subcommand};

use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(
    name = "halfwave",
    version,
    about = "Pipeline for the 3D mass-critical half-wave equation",
    after_help = "Config keys (flat `key = value`, '#' comments):\n\n"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat key = value config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root of the artifact directories
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    grid_n: Option<usize>,
    #[arg(long, global = true)]
    grid_rmax: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve for Q and check the virial identities
    GroundState,
    /// Build the approximate profile Q_P and its scaling report
    Profile,
    /// Integrate the leading modulation system and fit the blowup laws
    Modulation,
    /// Evolve modulated-profile data and extract the parameters
    Evolve,
    /// Localized-energy identities, coercivity and the biharmonic bound
    Diagnostics,
    /// Collect every stage report
    Report,
    /// Print the accepted config keys with their defaults
    Keys,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.grid_n {
        cfg.set("grid_n", &n.to_string())?;
    }
    if let Some(r) = cli.grid_rmax {
        cfg.set("grid_rmax", &r.to_string())?;
    }
    if let Some(s) = cli.seed {
        cfg.set("seed", &s.to_string())?;
    }
    let out = cli.out.as_path();
    let report = match cli.command {
        Command::GroundState => stages::ground_state(out, &cfg)?,
        Command::Profile => stages::profile(out, &cfg)?,
        Command::Modulation => stages::modulation(out, &cfg)?,
        Command::Evolve => stages::evolve_stage(out, &cfg)?,
        Command::Diagnostics => stages::diagnostics(out, &cfg)?,
        Command::Report => stages::report(out, &cfg)?,
        Command::Keys => {
            print!("{}", RunConfig::help());
            return Ok(());
        }
    };
    for c in &report.checks {
        let status = if c.report_only { "info" } else if c.pass { "pass" } else { "FAIL" };
        println!("{status:>4}  {:<40} {:>14.6e}  ({})", c.name, c.value, c.tolerance);
    }
    let failed = report.failed();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::ChecksFailed(failed))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            if e.kind() == ErrorKind::DisplayHelp {
                print!("{}", RunConfig::help());
            }
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Config(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
