use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rotbec_cli::commands::{run, Command, Context};
use rotbec_cli::config::Loaded;
use rotbec_cli::resolve_workers;

#[derive(Parser, Debug)]
#[command(name = "rotbec", version, about = "Rotating Bose gas solvers")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Concurrent sweep points; falls back to ROTBEC_WORKERS.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// GP minimization with vortex and symmetry diagnostics.
    GpMin,
    /// Density-matrix minimization warm-started from the GP minimizer.
    DmMin,
    /// GP, diagnostics and DM over a list of g or Ω_z values.
    Sweep,
    /// Truncated many-body scan of E0(N, g/N)/N.
    Fock,
    /// Coherent-state identities.
    Coherent,
    /// Scattering lengths, scaling and the Born check.
    Scatter,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let Some(path) = args.config else {
        eprintln!("configuration error: --config <path> is required");
        return ExitCode::from(2);
    };
    let command = match args.command {
        Cmd::GpMin => Command::GpMin,
        Cmd::DmMin => Command::DmMin,
        Cmd::Sweep => Command::Sweep,
        Cmd::Fock => Command::Fock,
        Cmd::Coherent => Command::Coherent,
        Cmd::Scatter => Command::Scatter,
    };
    let outcome = Loaded::from_path(&path).and_then(|loaded| {
        let ctx = Context {
            run: loaded,
            workers: resolve_workers(args.workers),
            verbose: args.verbose,
        };
        run(command, &ctx)
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
