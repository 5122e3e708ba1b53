//! Implied constant of the linear dispersive estimate on Gaussians.

use hfscat::diagnostics::dispersive_estimate_check;
use hfscat::{ComplexField, Grid};
use num_complex::Complex64;

fn main() -> hfscat::Result<()> {
    let g = Grid::new(8192, 2048.0)?;
    let times: Vec<f64> = (0..=12).map(|j| 2f64.powf(j as f64 / 2.0)).collect();
    for a in [0.5, 1.0, 2.0] {
        let f = ComplexField::from_fn(&g, |x| Complex64::new((-a * x * x).exp(), 0.0));
        let r = dispersive_estimate_check(&f, &times, 0.125, 1.0)?;
        println!(
            "a = {a}: constant {:.4} (‖f̂‖∞ = {:.4}, ‖f‖_H^(0,1) = {:.4})",
            r.constant, r.fourier_sup, r.weighted_l2
        );
        for row in r.rows.iter().step_by(4) {
            println!(
                "  t = {:6.2}  lhs {:.4e}  rhs {:.4e}  t^½-ratio {:.4}",
                row.t, row.lhs, row.rhs, row.leading_ratio
            );
        }
    }
    Ok(())
}
