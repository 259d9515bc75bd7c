use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kgm_cli::{parse_config, run, Command, RunOptions};

#[derive(Parser)]
#[command(name = "kgm", about = "Standing waves of the Klein-Gordon-Maxwell system")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// Experiment configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed; overrides `solver.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Solve for the electrostatic potential of a given profile.
    Reduce,
    /// Run the method selected in `solver.method`.
    Solve,
    /// Mountain-pass path deformation.
    Mpa,
    /// Minimisation on the Nehari manifold.
    Nehari,
    /// Truncation ladder for a supercritical perturbation.
    Truncate,
    /// Sampled hypothesis checks for the configured nonlinearity.
    CheckNl,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Reduce => Command::Reduce,
            Sub::Solve => Command::Solve,
            Sub::Mpa => Command::Mpa,
            Sub::Nehari => Command::Nehari,
            Sub::Truncate => Command::Truncate,
            Sub::CheckNl => Command::CheckNl,
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("KGM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("KGM_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let Some(config_path) = cli.config else {
        eprintln!("error: --config <path> is required");
        return ExitCode::from(2);
    };
    let text = match std::fs::read_to_string(&config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", config_path.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let base_dir = config_path
        .parent()
        .map(PathBuf::from)
        .unwrap_or_default();
    let opts = RunOptions {
        out_dir: cli.out.unwrap_or_else(|| base_dir.join(&cfg.output.dir)),
        seed: cli.seed,
        base_dir,
        timestamp: true,
    };
    match run(cli.command.into(), &cfg, &opts) {
        Ok(summary) if summary.ok => {
            if !cli.quiet {
                println!("PASS  report: {}", summary.report_path.display());
            }
            ExitCode::SUCCESS
        }
        Ok(summary) => {
            eprintln!(
                "FAIL  certificates: {}  report: {}",
                summary.failed.join(", "),
                summary.report_path.display()
            );
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
