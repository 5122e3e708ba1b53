//! One density matrix, two views: the weighted orbital family and the
//! Gaussian random field `X = Σ √α_n g_n u_n`. The empirical covariance of
//! many samples converges to `γ`, which is never needed in practice since
//! every expectation is an exact orbital sum.

use hfscat::ensemble::schatten1_distance;
use hfscat::integrator::{prepare_initial, InitialData, WavePacket};
use hfscat::Grid;
use num_complex::Complex64;

fn main() -> hfscat::Result<()> {
    let g = Grid::new(256, 32.0)?;
    let data = InitialData {
        packets: vec![
            WavePacket::gaussian(1.0, 1.0, -2.0, 0.5, 1.0),
            WavePacket::gaussian(0.5, 1.0, 2.0, -0.5, 1.0).with_hermite(1),
        ],
    };
    let ens = prepare_initial(&data, &g, 0.0)?;
    let probe = &ens.orbitals()[0];
    let exact = ens.covariance_apply(probe)?;

    let samples = 20_000;
    let mut acc = vec![Complex64::new(0.0, 0.0); g.n_points()];
    for seed in 0..samples {
        let x = ens.sample_field(seed).realization;
        let c = x.inner(probe)?;
        for (a, v) in acc.iter_mut().zip(x.values()) {
            *a += c * v / samples as f64;
        }
    }
    let empirical = hfscat::ComplexField::new(&g, acc)?;
    println!(
        "‖γv − E[⟨X,v⟩X]‖/‖γv‖ = {:.3e} over {samples} samples",
        exact.sub(&empirical)?.l2_norm() / exact.l2_norm()
    );
    println!("Tr γ = {:.6}", ens.trace_mass());
    let (tg, tx) = ens.weighted_traces();
    println!("Tr(⟨∇⟩γ) = {tg:.6}  Tr(⟨x⟩γ) = {tx:.6}");
    for t in [1.0, 4.0, 16.0] {
        let d = schatten1_distance(&ens, &ens.free_propagate(t))?;
        println!("‖γ − e^{{itΔ}}γe^{{−itΔ}}‖_S¹ at t = {t:4.1}: {d:.6}");
    }
    Ok(())
}
