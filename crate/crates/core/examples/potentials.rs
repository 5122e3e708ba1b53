//! Closed-form transforms `ŵ(η)` of the interaction variants.

use hfscat::potential::Atom;
use hfscat::Potential;

fn main() -> hfscat::Result<()> {
    let variants = [
        ("dirac", Potential::dirac(1.0)),
        ("gaussian", Potential::gaussian(1.0, 1.0)?),
        ("box", Potential::box_mass(1.0, 1.0)?),
        (
            "dirac pair",
            Potential::dirac_sum(vec![Atom { mass: 0.5, shift: 1.0 }, Atom { mass: 0.5, shift: -1.0 }])?,
        ),
    ];
    print!("{:>10}", "η");
    for (name, _) in &variants {
        print!("{name:>14}");
    }
    println!();
    for j in 0..=8 {
        let eta = j as f64 * 0.5;
        print!("{eta:10.2}");
        for (_, w) in &variants {
            print!("{:14.6e}", w.fourier_at(eta));
        }
        println!();
    }
    for (name, w) in &variants {
        println!("{name}: total mass {}, |w| = {}", w.total_mass(), w.m1_norm());
    }
    Ok(())
}
