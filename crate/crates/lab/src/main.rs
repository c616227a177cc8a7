use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use levy_lab::{io, run_experiment, ExperimentManifest, LabError, CATALOG, OUT_ENV};

/// Runs the levy-core experiments from flat TOML manifests.
#[derive(Parser)]
#[command(name = "levy-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment a manifest describes.
    Run {
        manifest: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_paths: Option<usize>,
        /// Output directory (default: manifest `out_dir`, then $LEVY_LAB_OUT, then `levy-lab-out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// No progress messages on standard error.
        #[arg(long)]
        quiet: bool,
    },
    /// List the experiment catalog.
    List,
    /// Parse and check a manifest without running it.
    ValidateConfig { manifest: PathBuf },
}

fn load(path: &PathBuf) -> Result<ExperimentManifest, LabError> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::Usage(format!("{}: {e}", path.display())))?;
    ExperimentManifest::from_toml(&text)
}

fn run(cli: Cli) -> Result<bool, LabError> {
    match cli.command {
        Command::List => {
            for e in CATALOG {
                println!("{:<16} {}  [{}]", e.name(), e.description(), e.reference());
            }
            Ok(true)
        }
        Command::ValidateConfig { manifest } => {
            let m = load(&manifest)?;
            println!("ok: {} with seed {}", m.experiment, m.seed);
            Ok(true)
        }
        Command::Run {
            manifest,
            seed,
            n_paths,
            out,
            quiet,
        } => {
            let mut m = load(&manifest)?;
            if let Some(s) = seed {
                m.seed = s;
            }
            if let Some(n) = n_paths {
                m.n_paths = n;
            }
            let dir = out
                .or_else(|| m.out_dir.clone())
                .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("levy-lab-out"))
                .join(m.experiment.name());
            m.out_dir = None;
            let outcome = match run_experiment(&m, quiet) {
                Ok(o) => o,
                Err(e @ LabError::Usage(_)) => return Err(e),
                Err(e) => {
                    // the failure still leaves a machine-readable report
                    std::fs::create_dir_all(&dir)?;
                    let line = serde_json::json!({ "experiment": m.experiment, "seed": m.seed, "error": e.to_string() });
                    std::fs::write(dir.join("reports.jsonl"), format!("{line}\n"))?;
                    std::fs::write(dir.join("manifest.toml"), m.to_toml())?;
                    return Err(e);
                }
            };
            io::write_outputs(&dir, &m, &outcome)?;
            print!("{}", io::summary(&m, &outcome));
            println!("outputs in {}", dir.display());
            Ok(outcome.pass())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("levy-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

