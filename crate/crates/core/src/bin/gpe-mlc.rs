use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gpe_mlc::harness::{execute, Mode, Overrides, RunConfig};
use gpe_mlc::mesh::Domain;
use gpe_mlc::Error;

#[derive(Parser)]
#[command(name = "gpe-mlc", version, about = "Multilevel-correction solver for the Gross–Pitaevskii ground state")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        domain: Option<Domain>,
        #[arg(long)]
        zeta: Option<f64>,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long = "base-n")]
        base_n: Option<usize>,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long = "out-dir")]
        out_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run {
        config,
        domain,
        zeta,
        levels,
        base_n,
        mode,
        theta,
        out_dir,
    } = cli.command;

    let mut cfg = match RunConfig::from_file(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: cannot load {}: {e}", config.display());
            return ExitCode::from(2);
        }
    };
    Overrides {
        domain,
        zeta,
        levels,
        base_n,
        mode,
        theta,
        out_dir,
    }
    .apply(&mut cfg);
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match execute(&cfg) {
        Ok(0) => {
            println!("results written to {}", cfg.out_dir.display());
            ExitCode::SUCCESS
        }
        Ok(code) => {
            eprintln!(
                "run finished without full convergence; see {}",
                cfg.out_dir.join("report.json").display()
            );
            ExitCode::from(code as u8)
        }
        Err(e @ (Error::Config { .. } | Error::Parse(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
