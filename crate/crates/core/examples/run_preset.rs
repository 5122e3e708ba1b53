//! Runs a shipped preset and prints the headline diagnostics.
//!
//! `cargo run --release --example run_preset -- preset-rank1 [amplitude-factor]`

use std::time::Instant;

use hfscat::commands::{analyze, simulate};
use hfscat::config::preset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "preset-rank1".into());
    let factor: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1.0);
    let cfg = preset(&name)?.with_amplitude_factor(factor);

    let start = Instant::now();
    let traj = simulate(&cfg)?;
    let sim = start.elapsed();
    let report = analyze(&cfg, &traj)?;
    println!(
        "{name} x{factor}: {} steps in {sim:.1?}, analysis {:.1?}",
        report.steps,
        start.elapsed() - sim
    );
    println!(
        "mass drift {:.3e}  gram drift {:.3e}",
        report.mass_drift, report.gram_drift
    );
    println!("sup decay exponent {:?}", report.sup_decay_exponent);
    println!("cauchy exponent    {:?}", report.cauchy_exponent);
    for c in &report.cauchy {
        println!(
            "  d({:6.2},{:6.2}) = {:.3e}  theta0 {:.3e}  0theta {:.3e}",
            c.t1, c.t2, c.d_inf, c.d_theta0, c.d_0theta
        );
    }
    println!("s1 exponent        {:?}", report.s1_exponent);
    println!("remainder exponent {:?}", report.remainder_exponent);
    for (s, r) in &report.remainder_sup {
        println!("  R({s:6.2}) = {r:.3e}");
    }
    if let Some(p) = &report.phase_drift {
        println!("phase slope {:.4e} ± {:.1e} at xi {:.4}", p.slope, p.stderr, p.xi);
    }
    if let Some(c) = &report.remainder_cross_check {
        println!(
            "cross-check at s={}: diff {:.3e}, |R_fd| {:.3e}, excess {:.3e}, passed {}",
            c.s, c.max_difference, c.fd_sup, c.worst_excess, c.passed
        );
    }
    if let Some(x) = &report.xt_norm {
        println!("XT norm {:.4e} {:?}", x.combined, x.components);
    }
    for w in report.warnings.iter().chain(&report.notes) {
        println!("note: {w}");
    }
    Ok(())
}
