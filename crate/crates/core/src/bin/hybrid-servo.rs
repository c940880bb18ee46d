use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hybrid_servo::run::{run_trajectory, RunConfig};

/// Solve a hybrid force-velocity control scenario step by step.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output JSON file.
    #[arg(long)]
    out: PathBuf,
    /// Seed of the random starts.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of random starts of the direction search.
    #[arg(long)]
    starts: Option<usize>,
    /// Relative singular-value threshold for rank decisions.
    #[arg(long)]
    rank_tol: Option<f64>,
    /// Box bound on the force command (N).
    #[arg(long)]
    f_max: Option<f64>,
    /// Also write per-step diagnostics and timings next to the output.
    #[arg(long)]
    csv: bool,
    /// Attach a verification report to every step.
    #[arg(long)]
    verify: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 4 } else { 0 });
        }
    };
    let config = RunConfig {
        scenario_path: args.scenario,
        output_path: args.out,
        num_starts: args.starts,
        rng_seed: args.seed,
        rank_tol: args.rank_tol,
        f_max: args.f_max,
        emit_csv: args.csv,
        verify: args.verify,
    };
    match run_trajectory(&config) {
        Ok(output) => {
            let failed = output
                .steps
                .iter()
                .filter(|s| s.verification.as_ref().is_some_and(|v| !v.passed))
                .count();
            eprintln!("solved {} steps, {} failed verification", output.steps.len(), failed);
            ExitCode::SUCCESS
        }
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code() as u8)
        }
    }
}
