use std::path::PathBuf;
use std::process::ExitCode;

use bkp_cli::commands::EXIT_CONFIG;
use bkp_cli::{run, Command};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bkp-pole-lab",
    version,
    about = "Elliptic BKP pole dynamics lab"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Integrate the pole flow and monitor conserved quantities.
    Simulate(Common),
    /// Run the identity suite on the configured lattice.
    VerifyIdentities(Common),
    /// Tabulate spectral polynomial coefficients along a trajectory.
    SpectralScan(Common),
    /// Build the Baker-Akhiezer function and check its linear problem.
    CheckLinearProblem(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed, overriding `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors share the invalid-configuration status
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let (command, args) = match cli.command {
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::VerifyIdentities(a) => (Command::VerifyIdentities, a),
        Sub::SpectralScan(a) => (Command::SpectralScan, a),
        Sub::CheckLinearProblem(a) => (Command::CheckLinearProblem, a),
    };
    let outcome = run(command, &args.config, args.out.as_deref(), args.seed);
    if outcome.code == 0 {
        println!("{}", outcome.message);
    } else {
        eprintln!("error: {}", outcome.message);
    }
    ExitCode::from(outcome.code)
}
