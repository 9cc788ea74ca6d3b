use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use maclim::chamber::ChamberConfig;
use maclim_cli::output::{self, Artifact};
use maclim_cli::scenario::{self, sha256_hex};
use maclim_cli::{run, CliError, Result};

#[derive(Parser)]
#[command(name = "maclim", version, about = "Run averaged-ensemble measurement scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Run {
        scenario: PathBuf,
        /// Overrides the scenario's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a scenario without computing.
    Validate { scenario: PathBuf },
    /// List the scenarios in a directory.
    ListScenarios {
        #[arg(default_value = "scenarios")]
        dir: PathBuf,
    },
    /// Simulate one droplet chain from a chamber configuration.
    Chamber {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("MACLIM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("MACLIM_THREADS: expected a positive integer, got \"{raw}\"")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("MACLIM_THREADS: {e}")))
}

fn run_scenario(path: &Path, out: Option<PathBuf>) -> Result<()> {
    let loaded = scenario::load(path)?;
    let s = &loaded.scenario;
    let artifacts = run::execute(s)?;
    let dir = out
        .or_else(|| s.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&s.name));
    for p in output::write_all(&dir, &artifacts, &loaded.config_hash)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn chamber(seed: u64, config: &Path, out: &Path) -> Result<()> {
    let bytes = std::fs::read(config).map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
    let cfg: ChamberConfig =
        serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
    cfg.validate()
        .map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
    let chain = run::simulate(&cfg, seed)?;
    let table = run::chain_table(&chain);
    let dir = out
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let file = out
        .file_name()
        .ok_or_else(|| CliError::Config(format!("--out {}: not a file path", out.display())))?;
    output::write_all(
        dir,
        &[Artifact::Csv {
            file: file.to_string_lossy().into_owned(),
            table,
        }],
        &sha256_hex(&bytes),
    )?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Run { scenario, out } => run_scenario(&scenario, out),
        Command::Validate { scenario } => {
            let s = scenario::load(&scenario)?;
            println!("ok: {} ({})", s.scenario.name, s.scenario.task.kind());
            Ok(())
        }
        Command::ListScenarios { dir } => {
            for path in scenario::discover(&dir)? {
                match scenario::load(&path) {
                    Ok(s) => println!("{}\t{}\t{}", s.scenario.name, s.scenario.task.kind(), path.display()),
                    Err(e) => println!("invalid\t-\t{}\t{e}", path.display()),
                }
            }
            Ok(())
        }
        Command::Chamber { seed, config, out } => chamber(seed, &config, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
