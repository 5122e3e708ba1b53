//! Free Schrödinger flow of a Gaussian against its closed form, and the
//! `t^{-1/2}` sup-norm decay.

use hfscat::grid::{forward_transform, free_propagate};
use hfscat::{ComplexField, Grid};
use num_complex::Complex64;

fn main() -> hfscat::Result<()> {
    let g = Grid::new(8192, 2048.0)?;
    let f = ComplexField::from_fn(&g, |x| Complex64::new((-x * x / 2.0).exp(), 0.0));
    println!(
        "‖f‖ = {:.12}  ‖f̂‖ = {:.12}",
        f.l2_norm(),
        forward_transform(&f).l2_norm()
    );
    println!("{:>6} {:>12} {:>12} {:>10}", "t", "sup|u|", "t^½ sup|u|", "err");
    for t in [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0] {
        let u = free_propagate(&f, t);
        // i u_t = −u_xx from e^{−x²/2}: (1 + 2it)^{-1/2} e^{−x²/(2(1 + 2it))}
        let exact = ComplexField::from_fn(&g, |x| {
            let d = Complex64::new(1.0, 2.0 * t);
            (-x * x / (2.0 * d)).exp() / d.sqrt()
        });
        let err = u.sub(&exact)?.sup_norm();
        println!(
            "{t:6.1} {:12.6e} {:12.6} {err:10.2e}",
            u.sup_norm(),
            t.sqrt() * u.sup_norm()
        );
    }
    Ok(())
}
