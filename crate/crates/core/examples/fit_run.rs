//! Runs a small preset into the output root, then refits stored series
//! the way `hfscat fit` does.

use hfscat::commands::{cmd_fit, cmd_run, output_root, run_dir, FIT_QUANTITIES};
use hfscat::config::preset;

fn main() -> hfscat::Result<()> {
    let cfg = preset("preset-rank1")?;
    let dir = run_dir(&cfg, &output_root());
    cmd_run(&cfg, &dir)?;
    println!("artifacts in {}", dir.display());
    for q in FIT_QUANTITIES {
        match cmd_fit(&dir, q, (4.0, 64.0)) {
            Ok(f) => println!(
                "{q:>16}: exponent {:+.4} ± {:.1e} ({} points)",
                f.exponent, f.stderr, f.n_points
            ),
            Err(e) => println!("{q:>16}: {e}"),
        }
    }
    Ok(())
}
