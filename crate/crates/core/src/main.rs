use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lightcone::cli::{self, Command};

/// Light-cone verification for lattice particle models.
#[derive(Parser)]
#[command(name = "lightcone", version)]
struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Bound constants and envelope curves, no simulation.
    Envelope(Common),
    /// Evolve and write the density trace.
    Simulate(Common),
    /// Evolve, check every bound, write trace, envelopes and report.
    Verify(Common),
    /// Verify once per value of the config's sweep axis.
    Sweep(Common),
}

#[derive(clap::Args)]
struct Common {
    /// Run-config file (JSON).
    config: PathBuf,
    /// Output directory (overrides $LIGHTCONE_OUT_DIR and the config).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (command, common) = match args.command {
        Cmd::Envelope(c) => (Command::Envelope, c),
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Verify(c) => (Command::Verify, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
    };
    match cli::run(command, &common.config, common.out_dir.as_deref()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
