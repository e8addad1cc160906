//! Prints one line per acceptance criterion and exits non-zero when any of
//! them fails.

use std::time::Instant;

use tvb_validation::{criteria, Outcome};

fn report(results: &mut Vec<bool>, label: &str, start: Instant, outcome: Outcome) {
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(c) if c.failures.is_empty() => {
            println!("{label}: PASS ({secs:.2} s) {}", c.notes.join("; "));
            results.push(true);
        }
        Ok(c) => {
            println!("{label}: FAIL ({secs:.2} s) {} | measured: {}", c.failures.join("; "), c.notes.join("; "));
            results.push(false);
        }
        Err(e) => {
            println!("{label}: FAIL ({secs:.2} s) error: {e}");
            results.push(false);
        }
    }
}

fn main() {
    let suite = Instant::now();
    let mut results = Vec::new();
    for (label, f) in criteria() {
        let start = Instant::now();
        report(&mut results, label, start, f());
    }
    let failed = results.iter().filter(|ok| !**ok).count();
    println!(
        "acceptance: {} of {} lines passed in {:.2} s",
        results.len() - failed,
        results.len(),
        suite.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
