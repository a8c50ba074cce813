use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use zk_core::config::{parse_override, ExperimentConfig, Preset};
use zk_core::runner::{execute, read_report, resolve_output_dir};
use zk_core::ZkError;

#[derive(Parser)]
#[command(name = "zk", version, about = "Regularized Zakharov-Kuznetsov channel experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config (or a bare preset name).
    Run {
        config: String,
        /// Output directory; must not exist yet.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, env = "ZK_JOBS")]
        jobs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Dotted `key=value` override, repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print the report of a finished run.
    Report { run_dir: PathBuf },
    /// List the available presets.
    Presets,
}

fn exit_code(e: &ZkError) -> u8 {
    match e {
        ZkError::Config(_) | ZkError::Usage(_) | ZkError::Domain(_) => 2,
        ZkError::Instability { .. } | ZkError::Guard(_) | ZkError::Convergence(_) => 3,
        ZkError::Io(_) => 4,
        ZkError::Data(_) => 1,
    }
}

fn load(config: &str, seed: Option<u64>, overrides: &[String]) -> Result<ExperimentConfig, ZkError> {
    let text = match fs::read_to_string(config) {
        Ok(t) => t,
        Err(e) => match Preset::ALL.iter().find(|p| p.name() == config) {
            Some(p) => format!("preset = \"{}\"", p.name()),
            None => return Err(ZkError::Usage(format!("cannot read config {config}: {e}"))),
        },
    };
    let mut ov = overrides.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>, _>>()?;
    if let Some(s) = seed {
        let s = i64::try_from(s).map_err(|_| ZkError::Usage(format!("seed {s} is too large")))?;
        ov.push(("seed".into(), toml::Value::Integer(s)));
    }
    ExperimentConfig::parse_with_overrides(&text, &ov)
}

fn run(cli: Cli) -> Result<(), ZkError> {
    match cli.command {
        Command::Run {
            config,
            output,
            jobs,
            seed,
            overrides,
        } => {
            let cfg = load(&config, seed, &overrides)?;
            let dir = resolve_output_dir(&cfg, output.as_deref());
            let dir = execute(&cfg, &dir, jobs)?;
            println!("{}", dir.display());
        }
        Command::Report { run_dir } => {
            for (k, v) in read_report(&run_dir)? {
                println!("{k}={v}");
            }
        }
        Command::Presets => {
            for p in Preset::ALL {
                println!("{}", p.name());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("zk: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
