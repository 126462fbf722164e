//! `pwrgram`: generate site sets, build power diagrams, verify against the
//! brute-force reference, benchmark, and export meshes.
//!
//! Exit codes: 0 success, 1 usage error, 2 input error, 3 verification
//! failure.

mod bench;
mod build;
mod common;
mod gen;
mod sweep;
mod verify;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use common::CliError;

#[derive(Parser)]
#[command(
    name = "pwrgram",
    version,
    about = "3D Voronoi and power diagram toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic site set and write it as a binary site file.
    Gen(gen::GenArgs),
    /// Build the power diagram of a site file.
    Build(build::BuildArgs),
    /// Build both the fast diagram and the brute-force reference; compare.
    Verify(verify::VerifyArgs),
    /// Timed benchmark runs over a configuration matrix.
    Bench(bench::BenchArgs),
    /// Sweep weight magnitudes and report the empty-cell ratio per ratio.
    SweepWeights(sweep::SweepArgs),
    /// Build with geometry and export cell polyhedra as an OBJ mesh.
    Export(build::ExportArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Gen(args) => gen::run(args),
        Command::Build(args) => build::run(args),
        Command::Verify(args) => verify::run(args),
        Command::Bench(args) => bench::run(args),
        Command::SweepWeights(args) => sweep::run(args),
        Command::Export(args) => build::run_export(args),
    };
    match result {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}
