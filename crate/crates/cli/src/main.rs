use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use safeland_cli::commands::{cmd_run, cmd_sweep, cmd_validate, RunManifest};
use safeland_cli::validate::{Fault, ValidateOptions};
use safeland_core::Fidelity;

#[derive(Parser)]
#[command(
    name = "safeland",
    version,
    about = "Safe multi-UAV landing on moving ground vehicles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FidelityArg {
    Kinematic,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write states, barriers, inputs and metrics.
    Run {
        scenario: PathBuf,
        /// Overrides the fidelity in the scenario file.
        #[arg(long, value_enum)]
        fidelity: Option<FidelityArg>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the built-in verification suites.
    Validate {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Solver tolerance used in the oracle comparison.
        #[arg(long)]
        qp_tol: Option<f64>,
        /// Negate the landing gradient before checking it.
        #[arg(long, hide = true)]
        inject_gradient_fault: bool,
    },
    /// Run a scenario over a parameter grid such as `alpha=1,2,4;beta=1`.
    Sweep {
        scenario: PathBuf,
        #[arg(long, default_value = "")]
        grid: String,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout();
    let code = match cli.command {
        Command::Run {
            scenario,
            fidelity,
            out,
        } => cmd_run(
            &RunManifest {
                scenario,
                out_dir: out,
                fidelity: fidelity.map(|f| match f {
                    FidelityArg::Kinematic => Fidelity::Kinematic,
                    FidelityArg::Full => Fidelity::FullDynamics,
                }),
            },
            &mut stdout,
        ),
        Command::Validate {
            seed,
            qp_tol,
            inject_gradient_fault,
        } => cmd_validate(
            &ValidateOptions {
                seed,
                qp_tol,
                fault: inject_gradient_fault.then_some(Fault::FlipLandingGradient),
                ..ValidateOptions::default()
            },
            &mut stdout,
        ),
        Command::Sweep { scenario, grid, out } => cmd_sweep(&scenario, &grid, &out, &mut stdout),
    };
    ExitCode::from(code as u8)
}
