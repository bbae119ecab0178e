//! Acceptance suite: the seed-7 theorem suite, run twice through the binary.

use std::process::{Command, ExitCode};

use serde_json::Value;

const SEED: &str = "7";

fn run_suite() -> (Vec<u8>, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_matrange"))
        .args(["theoremsuite", "--seed", SEED])
        .env_remove("MATRANGE_SEED")
        .output()
        .expect("spawn matrange");
    (out.stdout, out.status.code().unwrap_or(-1))
}

fn main() -> ExitCode {
    let (first, code) = run_suite();
    let (second, _) = run_suite();
    let report: Value = match serde_json::from_slice(&first) {
        Ok(v) => v,
        Err(e) => {
            println!("suite output did not parse: {e}");
            return ExitCode::FAILURE;
        }
    };
    let mut all = true;
    let criteria = report["criteria"].as_array().cloned().unwrap_or_default();
    for id in 1..=7u64 {
        let c = criteria.iter().find(|c| c["id"].as_u64() == Some(id));
        let (passed, name, summary) = match c {
            Some(c) => (
                c["passed"].as_bool() == Some(true),
                c["name"].as_str().unwrap_or("?").to_string(),
                c["summary"].as_str().unwrap_or("").to_string(),
            ),
            None => (false, "missing".to_string(), String::new()),
        };
        all &= passed;
        println!(
            "criterion {id}: {name} - {} ({summary})",
            if passed { "PASS" } else { "FAIL" }
        );
    }
    let identical = first == second;
    all &= identical;
    println!(
        "criterion 8: determinism - {} ({} bytes, {})",
        if identical { "PASS" } else { "FAIL" },
        first.len(),
        if identical {
            "byte-identical"
        } else {
            "reports differ"
        }
    );
    if code != 0 && all {
        println!("suite exit code {code} disagrees with criteria");
        all = false;
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
