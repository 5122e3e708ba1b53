//! Hartree-Fock against reduced Hartree on identical data: phase drift of
//! the dominant profile and Cauchy decay for both.
//!
//! `cargo run --release --example compare_modes -- preset-contrast`

use hfscat::commands::{cmd_compare, output_root};
use hfscat::config::preset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "preset-contrast".into());
    let cfg = preset(&name)?;
    let dir = output_root().join(format!("{name}-compare"));
    let report = cmd_compare(&cfg, &dir)?;
    for side in [&report.hartree_fock, &report.reduced_hartree] {
        match &side.phase_drift {
            Some(p) => println!(
                "{:16} slope {:+.4e} ± {:.1e} (xi {:.4}, orbital {})  cauchy exponent {:?}",
                side.mode.name(),
                p.slope,
                p.stderr,
                p.xi,
                p.orbital,
                side.cauchy_exponent
            ),
            None => println!("{:16} no phase fit", side.mode.name()),
        }
    }
    println!("ratio |slope_HF|/|slope_RH| = {:?}", report.ratio);
    for w in &report.warnings {
        println!("warning: {w}");
    }
    println!("written to {}", dir.display());
    Ok(())
}
