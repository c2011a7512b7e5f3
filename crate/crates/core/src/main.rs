use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use psf_core::cli::{execute, CliOptions, Command};

/// p-Laplacian eigenvalues along geometric flows on a periodic surface.
#[derive(Parser, Debug)]
#[command(name = "psf", version)]
struct Args {
    #[command(subcommand)]
    command: Cmd,

    /// Flat `section.key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Seed for random metrics and fields (overrides `run.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Also write the (final) eigenfunction snapshot.
    #[arg(long, global = true)]
    dump_eigenfunction: bool,

    /// Keep going when the eigensolver misses its tolerances.
    #[arg(long, global = true)]
    allow_unconverged: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Integrate the flow, tracking the eigenvalue, and run the checks.
    Run,
    /// Single eigen-solve on the initial metric.
    Eigen,
    /// Grid-refinement study of the eigenvalue.
    Convergence,
    /// Check the metric-variation identities.
    VerifyLemmas,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cmd = match args.command {
        Cmd::Run => Command::Run,
        Cmd::Eigen => Command::Eigen,
        Cmd::Convergence => Command::Convergence,
        Cmd::VerifyLemmas => Command::VerifyLemmas,
    };
    let opts = CliOptions {
        config: args.config,
        output: args.output,
        seed: args.seed,
        dump_eigenfunction: args.dump_eigenfunction,
        allow_unconverged: args.allow_unconverged,
    };
    let threads = std::env::var("PSF_THREADS").ok();
    let code = execute(
        cmd,
        &opts,
        threads.as_deref(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    ExitCode::from(code as u8)
}
