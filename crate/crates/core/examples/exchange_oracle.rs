//! Low-rank exchange term against the dense `O(N²K)` quadrature, with
//! timings.

use std::time::Instant;

use hfscat::nonlinearity::{exchange_dense_oracle_for, exchange_term};
use hfscat::verify::packet_ensemble;
use hfscat::{Grid, Potential};

fn main() -> hfscat::Result<()> {
    let w = Potential::gaussian(1.0, 1.0)?;
    println!("{:>5} {:>3} {:>12} {:>12} {:>10}", "N", "K", "fast", "dense", "rel err");
    for n in [64, 128, 256, 512] {
        for k in [1, 2, 4] {
            let g = Grid::new(n, 0.1875 * n as f64)?;
            let ens = packet_ensemble(&g, k, 0.6)?;
            let t0 = Instant::now();
            let fast = exchange_term(&ens, &w);
            let t1 = Instant::now();
            let dense = exchange_dense_oracle_for(&ens, &w)?;
            let t2 = Instant::now();
            let scale = dense.iter().map(|f| f.sup_norm()).fold(0.0, f64::max);
            let mut err: f64 = 0.0;
            for (a, b) in fast.iter().zip(&dense) {
                err = err.max(a.sub(b)?.sup_norm() / scale);
            }
            println!("{n:5} {k:3} {:12.1?} {:12.1?} {err:10.2e}", t1 - t0, t2 - t1);
        }
    }
    Ok(())
}
