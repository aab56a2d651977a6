use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use tgdecay_cli::commands::{run_decay, run_poles, run_sweep};
use tgdecay_cli::{config, CliError};

#[derive(Parser)]
#[command(name = "tgdecay", version, about = "Tunneling decay of trap modes and Tonks-Girardeau gases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resonance pole table.
    Poles(Flags),
    /// Nonescape probability or trapped number on a time grid.
    Decay(Flags),
    /// One decay curve per eta / N / gas combination, plus an index.
    Sweep(Flags),
}

#[derive(Args)]
struct Flags {
    /// key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Spectral tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Extra key=value setting; repeatable, applied after the config file.
    #[arg(long = "set", short = 's', value_name = "KEY=VALUE")]
    set: Vec<String>,
}

type Handler = fn(&tgdecay_cli::RunConfig) -> Result<PathBuf, CliError>;

fn run(cli: Cli) -> Result<PathBuf, CliError> {
    let (flags, cmd): (&Flags, Handler) = match &cli.command {
        Command::Poles(f) => (f, run_poles),
        Command::Decay(f) => (f, run_decay),
        Command::Sweep(f) => (f, run_sweep),
    };
    let mut overrides = flags.set.clone();
    if let Some(out) = &flags.out {
        overrides.push(format!("out={}", out.display()));
    }
    if let Some(w) = flags.workers {
        overrides.push(format!("workers={w}"));
    }
    if let Some(t) = flags.tol {
        overrides.push(format!("tol={t}"));
    }
    let cfg = config::load(flags.config.as_deref(), &overrides)?;
    cmd(&cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("tgdecay: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
