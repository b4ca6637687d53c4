use std::process::ExitCode;

use clap::Parser;
use irsnoma_cli::experiment::run_experiment;
use irsnoma_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match cli.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let summary = match run_experiment(&cfg) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for a in &summary.aggregate {
        println!(
            "nt={} m={} ne={} rq={} rm={} xi={} {:<12} feasible {}/{} power {:.3} dB (+-{:.3})",
            a.nt, a.m, a.ne, a.r_q, a.r_m, a.xi_n, a.scheme, a.feasible, a.trials, a.power_db_mean, a.power_db_ci95
        );
    }
    println!("raw: {}", summary.outputs.raw.display());
    println!("aggregate: {}", summary.outputs.aggregate.display());
    if summary.all_points_feasible() {
        ExitCode::SUCCESS
    } else {
        eprintln!("some sweep points have no feasible trial");
        ExitCode::FAILURE
    }
}
