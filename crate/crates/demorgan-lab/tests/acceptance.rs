//! Runs the thirteen acceptance criteria and prints one PASS/FAIL line for each.
//!
//! Built without the libtest harness so the lines always reach the terminal.

use std::process::ExitCode;
use std::time::Instant;

use demorgan_lab::suite::{run_all, CRITERIA, DEFAULT_SEED, TOTAL_BUDGET};

fn main() -> ExitCode {
    demorgan_lab::cli::configure_threads();
    let start = Instant::now();
    let reports = run_all(DEFAULT_SEED);
    let elapsed = start.elapsed();
    println!("acceptance criteria (seed {DEFAULT_SEED})");
    for r in &reports {
        println!("{r}");
    }
    let within = elapsed < TOTAL_BUDGET;
    println!("{} total runtime {elapsed:.2?} (budget {TOTAL_BUDGET:?})", if within { "PASS" } else { "FAIL" });
    let passed = reports.iter().filter(|r| r.passed).count();
    println!("{passed}/{} criteria passed", CRITERIA.len());
    if passed == CRITERIA.len() && reports.len() == CRITERIA.len() && within {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
