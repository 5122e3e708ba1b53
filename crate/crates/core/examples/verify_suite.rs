//! The invariant suite behind `hfscat verify --level full`.

use hfscat::verify::{run_checks, Level};

fn main() {
    let results = run_checks(Level::Full);
    for r in &results {
        println!(
            "{:5} {:26} {:>11.3e} (tol {:.1e})  {}",
            if r.passed { "ok" } else { "FAIL" },
            r.check,
            r.value,
            r.tolerance,
            r.detail
        );
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} checks, {failed} failed", results.len());
}
