use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phasor_lab::artifact::default_root;
use phasor_lab::config::{parse_override, Profile};
use phasor_lab::{registry, LabError, LabResult};
use serde_json::Value;

#[derive(Parser)]
#[command(name = "phasor-lab", version, about = "Run phasor-graph experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its artifacts.
    Run {
        id: String,
        #[arg(long, value_enum, default_value = "fast")]
        profile: Profile,
        /// Comma-separated seed list, e.g. 0,1,2.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Config override `key.path=value` (repeatable).
        #[arg(long = "set")]
        set: Vec<String>,
        /// Artifact root; defaults to $PHASOR_ARTIFACTS or ./artifacts.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// List registered experiments.
    List,
    /// Resolve and validate a config without running it.
    Validate {
        id: String,
        #[arg(long, value_enum, default_value = "fast")]
        profile: Profile,
        #[arg(long = "set")]
        set: Vec<String>,
    },
}

fn overrides(set: &[String], seeds: Option<Vec<u64>>) -> LabResult<Vec<(String, Value)>> {
    let mut out = set.iter().map(|s| parse_override(s)).collect::<LabResult<Vec<_>>>()?;
    if let Some(seeds) = seeds {
        out.push(("seeds".into(), Value::from(seeds)));
    }
    Ok(out)
}

fn run(cli: Cli) -> LabResult<()> {
    match cli.command {
        Command::List => {
            for e in registry::all() {
                println!("{:<6} [{}] {}", e.id(), e.modules().join(", "), e.claim());
            }
        }
        Command::Validate { id, profile, set } => {
            let entry = registry::get(&id)?;
            let resolved = entry.resolve(profile, &overrides(&set, None)?)?;
            println!("ok {id} ({}) config_hash={}", profile.name(), phasor_lab::config::config_hash(&resolved));
            println!("{}", serde_json::to_string_pretty(&resolved)?);
        }
        Command::Run {
            id,
            profile,
            seeds,
            set,
            out,
            workers,
        } => {
            let entry = registry::get(&id)?;
            let resolved = entry.resolve(profile, &overrides(&set, seeds)?)?;
            let dir = out.unwrap_or_else(default_root).join(&id);
            let manifest = entry.run(&resolved, workers, &dir);
            match &manifest {
                Ok(m) => eprintln!("{id}: {} cells in {:.1}s -> {}", m.cells.len(), m.wall_clock_secs, dir.display()),
                Err(LabError::PartialFailure { .. }) => eprintln!("{id}: partial failure, see {}", dir.join("manifest.json").display()),
                Err(_) => {}
            }
            manifest?;
            print!("{}", std::fs::read_to_string(dir.join("summary.csv")).unwrap_or_default());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
