//! Acceptance suite: criteria 1-8, one PASS/FAIL line each.
//!
//! `cargo test --release -p vfd-bench --test acceptance` runs all of them;
//! criterion numbers after `--` select a subset.

#[path = "../../../tensor/tests/common/mod.rs"]
mod tensor_oracles;

#[path = "../../../model/tests/oracles/mod.rs"]
mod model_oracles;

#[path = "../../../mining/tests/oracles/mod.rs"]
mod mining_oracles;

#[path = "../../../data/tests/oracles/mod.rs"]
mod data_oracles;

#[path = "../../../train/tests/oracles/mod.rs"]
mod train_oracles;

mod criteria;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

type Check = fn() -> String;

const CRITERIA: [(usize, &str, Check); 8] = [
    (1, "numerics", criteria::numerics),
    (2, "preprocessing oracles", criteria::preprocessing),
    (3, "architecture contract", criteria::architecture),
    (4, "mining golden track", criteria::mining),
    (5, "sampling and weighting", criteria::sampling),
    (6, "toy end-to-end", criteria::toy_end_to_end),
    (7, "compression pipeline", criteria::compression),
    (8, "training protocol", criteria::protocol),
];

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (n, name, check) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n} ({name}): PASS [{secs:.1}s] {detail}"),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("criterion {n} ({name}): FAIL [{secs:.1}s] {msg}");
                failed.push(n);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
