//! Runs the randomized realizability suite and prints its summary.
//! Usage: `cargo run --release --example oracle_suite -- [trials] [seed]`.

use multimonotone::admissibility::DecisionConfig;
use multimonotone::oracle::{comparison_suite, SuiteDims};

fn main() -> multimonotone::Result<()> {
    let mut args = std::env::args().skip(1);
    let trials = args.next().and_then(|a| a.parse().ok()).unwrap_or(500);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(1);
    let report = comparison_suite(trials, SuiteDims::default(), seed, &DecisionConfig::default())?;
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    std::process::exit(if report.passed() { 0 } else { 1 });
}
