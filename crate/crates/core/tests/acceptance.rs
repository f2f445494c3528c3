//! One line per acceptance criterion; exits non-zero if any fails.

use crbm_core::verify::{run_criteria, VerifyConfig};

fn main() {
    let results = run_criteria(&VerifyConfig::default());
    let mut failed = 0;
    for c in &results {
        let in_time = c.elapsed <= c.time_limit;
        let ok = c.passed && in_time;
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {} [{}] {}: measured {:.3e} (tolerance {:.1e}), {:.2}s of {}s{} | {}",
            c.id,
            if ok { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.tolerance,
            c.elapsed.as_secs_f64(),
            c.time_limit.as_secs(),
            if in_time { "" } else { " (over time)" },
            c.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
