//! The stationary-phase remainder three ways: straight from the equation,
//! by direct quadrature of its kernel form on a coarse grid, and by finite
//! differences of the profile. Also evaluates the `F` identities.

use hfscat::diagnostics::{
    f_identity_check, profile, remainder_exact, remainder_fd_orbitals, remainder_quadrature, remainder_scale,
};
use hfscat::integrator::evolve_to;
use hfscat::verify::packet_ensemble;
use hfscat::{Grid, Potential, RhsMode, Scheme};

fn main() -> hfscat::Result<()> {
    let g = Grid::new(1024, 128.0)?;
    let w = Potential::gaussian(1.0, 1.0)?;
    let start = packet_ensemble(&g, 2, 0.5)?.free_propagate(1.0).with_time(1.0);
    let s = 4.0;
    let h = 0.01;
    let at = |t: f64| evolve_to(&start, &w, RhsMode::HartreeFock, Scheme::Ifrk4, 0.01, t - 1.0);
    let (minus, center, plus) = (at(s * (1.0 - h))?, at(s)?, at(s * (1.0 + h))?);

    let p = profile(&center);
    let coarse = Grid::new(64, 16.0)?;
    let quad = remainder_quadrature(&p, &w, &coarse)?;
    let exact = remainder_exact(&center, &w, RhsMode::HartreeFock);
    let fd = remainder_fd_orbitals(&profile(&minus), &profile(&plus))?;
    let scale = remainder_scale(&p, &w);
    println!("scale = {scale:.3e}");
    println!("{:>8} {:>12} {:>12} {:>12}", "ξ", "|R_exact|", "|R_q−R|", "|R_fd−R|");
    for k in (0..coarse.n_points()).step_by(8) {
        let xi = coarse.frequencies()[k];
        let slot = g.nearest_mode(xi);
        println!(
            "{xi:8.3} {:12.4e} {:12.2e} {:12.2e}",
            exact[0][slot].norm(),
            (quad[0][k] - exact[0][slot]).norm(),
            (fd[0][slot] - exact[0][slot]).norm()
        );
    }
    let f = f_identity_check(&p, &w, 1000, 3);
    println!(
        "max|F(s,0,0,ξ)| = {:.2e}, antisymmetry defect {:.2e}, natural size {:.2e}",
        f.f000_max, f.antisymmetry_max, f.f_scale
    );
    Ok(())
}
