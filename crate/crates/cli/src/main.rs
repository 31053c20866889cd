use clap::{Parser, Subcommand};
use ergodykit_cli::commands::{self, Context};
use ergodykit_cli::config::RunConfig;
use ergodykit_cli::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

/// Equilibrium states and decay of correlations for skew products.
#[derive(Parser)]
#[command(name = "ergodykit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (`[section] key = value`).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed; overrides `[run] seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Iterate to the equilibrium state: equilibrium.json, convergence.csv, eigen.json.
    Equilibrium(Common),
    /// Check the hypotheses: hypothesis_report.json.
    Verify(Common),
    /// Decay of correlations: correlations.csv, correlations.json.
    Correlations(Common),
    /// Regularity of the equilibrium state (or of --measure): regularity.json.
    Regularity {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        measure: Option<PathBuf>,
    },
    /// Norms of a dumped measure: norms.json.
    Norms {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        measure: PathBuf,
    },
    /// List the example systems.
    Gallery,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("ERGODYKIT_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Input(format!("ERGODYKIT_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Input(e.to_string()))
}

fn context(common: &Common) -> Result<Context, CliError> {
    let text = std::fs::read_to_string(&common.config).map_err(|e| CliError::Input(format!("{}: {e}", common.config.display())))?;
    let config = RunConfig::parse(&text)?;
    Context::new(config, common.out.clone(), common.seed)
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Equilibrium(c) => commands::equilibrium(&context(&c)?),
        Command::Verify(c) => commands::verify(&context(&c)?),
        Command::Correlations(c) => commands::correlations(&context(&c)?),
        Command::Regularity { common, measure } => commands::regularity(&context(&common)?, measure.as_deref()),
        Command::Norms { common, measure } => commands::norms(&context(&common)?, &measure),
        Command::Gallery => {
            print!("{}", commands::gallery_listing()?);
            Ok(Vec::new())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
