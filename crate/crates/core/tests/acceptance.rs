//! Acceptance gate: every criterion at its stated scale and tolerance,
//! printed as one PASS/FAIL line per criterion with its checks below.

use std::process::ExitCode;

use seqtreat::reproduce::{run_criterion, SEEDS};

fn main() -> ExitCode {
    let mut failed = Vec::new();
    for id in 1..=10 {
        match run_criterion(id, SEEDS[id - 1]) {
            Ok(rep) => {
                print!("{}", rep.render());
                if !rep.pass() {
                    failed.push(id);
                }
            }
            Err(e) => {
                println!("FAIL C{id} error: {e}");
                failed.push(id);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 10 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
