//! Direct and exchange terms of the Hartree-Fock nonlinearity in orbital form.
//!
//! With `k(x, y) = Σ_n α_n u_n(x) ū_n(y)` the exchange term acting on orbital
//! `m` is `Σ_n α_n u_n (w * (ū_n u_m))`, which needs one spectral convolution
//! per unordered pair `(n, m)`: `w * (ū_m u_n)` is the conjugate of
//! `w * (ū_n u_m)` since `w` is real and even. The direct potential
//! `w * ρ = Σ_n α_n w * |u_n|²` reuses the diagonal pairs.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::OrbitalEnsemble;
use crate::grid::{ComplexField, Grid};
use crate::potential::Potential;
use crate::{Error, Result};

/// Which nonlinearity drives the orbitals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhsMode {
    /// Direct minus exchange.
    HartreeFock,
    /// Direct term only.
    ReducedHartree,
    /// No nonlinearity.
    Linear,
}

impl RhsMode {
    pub fn name(self) -> &'static str {
        match self {
            RhsMode::HartreeFock => "hartree-fock",
            RhsMode::ReducedHartree => "reduced-hartree",
            RhsMode::Linear => "linear",
        }
    }
}

impl std::str::FromStr for RhsMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hartree-fock" => Ok(RhsMode::HartreeFock),
            "reduced-hartree" => Ok(RhsMode::ReducedHartree),
            "linear" => Ok(RhsMode::Linear),
            other => Err(Error::arg(format!("unknown mode `{other}`"))),
        }
    }
}

/// Precomputed nonlinear operator on a fixed grid and potential.
///
/// Works on raw orbital sample vectors so the integrator can avoid
/// re-wrapping fields at every stage.
#[derive(Clone, Debug)]
pub struct NonlinearOperator {
    grid: Grid,
    multiplier: Vec<f64>,
    mode: RhsMode,
    spectral_mask: Option<Vec<f64>>,
    exchange_sign: f64,
}

impl NonlinearOperator {
    pub fn new(grid: &Grid, w: &Potential, mode: RhsMode) -> Self {
        NonlinearOperator {
            grid: grid.clone(),
            multiplier: grid.convolution_multiplier(w),
            mode,
            spectral_mask: None,
            exchange_sign: 1.0,
        }
    }

    /// Enables the 2/3-rule mask on the transformed nonlinearity.
    pub fn with_dealiasing(mut self, enabled: bool) -> Self {
        self.spectral_mask = enabled.then(|| self.grid.dealias_mask());
        self
    }

    /// Flips the sign of the exchange contribution. Only used to inject a
    /// known fault into the verification suite.
    #[doc(hidden)]
    pub fn with_exchange_sign(mut self, sign: f64) -> Self {
        self.exchange_sign = sign;
        self
    }

    pub fn mode(&self) -> RhsMode {
        self.mode
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `w * (ū_n u_m)` for all `n ≤ m`, in row-major pair order.
    fn pair_convolutions(&self, orbitals: &[&[Complex64]]) -> Vec<Vec<Complex64>> {
        let k = orbitals.len();
        let pairs: Vec<(usize, usize)> = (0..k).flat_map(|n| (n..k).map(move |m| (n, m))).collect();
        pairs
            .par_iter()
            .map(|&(n, m)| {
                let mut buf: Vec<Complex64> = orbitals[n].iter().zip(orbitals[m]).map(|(a, b)| a.conj() * b).collect();
                self.grid.convolve_raw(&self.multiplier, &mut buf);
                buf
            })
            .collect()
    }

    fn pair_index(k: usize, n: usize, m: usize) -> usize {
        // row n of the upper triangle starts after n rows of lengths k, k-1, ...
        n * k - n * n.saturating_sub(1) / 2 + (m - n)
    }

    /// Returns `(direct_m, exchange_m)` for every orbital.
    pub fn terms(&self, weights: &[f64], orbitals: &[&[Complex64]]) -> Vec<(Vec<Complex64>, Vec<Complex64>)> {
        let k = orbitals.len();
        let n_pts = self.grid.n_points();
        let conv = self.pair_convolutions(orbitals);
        let pair = |n: usize, m: usize| -> (usize, bool) {
            if n <= m {
                (Self::pair_index(k, n, m), false)
            } else {
                (Self::pair_index(k, m, n), true)
            }
        };
        // w * ρ, accumulated in a fixed orbital order
        let mut potential = vec![Complex64::new(0.0, 0.0); n_pts];
        for (n, a) in weights.iter().enumerate() {
            let c = &conv[pair(n, n).0];
            for (p, v) in potential.iter_mut().zip(c) {
                *p += v * *a;
            }
        }
        (0..k)
            .into_par_iter()
            .map(|m| {
                let direct: Vec<Complex64> = potential.iter().zip(orbitals[m]).map(|(p, u)| p * u).collect();
                let mut exchange = vec![Complex64::new(0.0, 0.0); n_pts];
                for n in 0..k {
                    let (idx, conjugate) = pair(n, m);
                    let c = &conv[idx];
                    let a = weights[n];
                    if conjugate {
                        for ((e, cv), u) in exchange.iter_mut().zip(c).zip(orbitals[n]) {
                            *e += (cv.conj() * a) * u;
                        }
                    } else {
                        for ((e, cv), u) in exchange.iter_mut().zip(c).zip(orbitals[n]) {
                            *e += (cv * a) * u;
                        }
                    }
                }
                (direct, exchange)
            })
            .collect()
    }

    /// Raw FFT of the nonlinearity for every orbital, Nyquist slot zeroed.
    pub fn apply_spectral(&self, weights: &[f64], orbitals: &[&[Complex64]]) -> Vec<Vec<Complex64>> {
        let n_pts = self.grid.n_points();
        if self.mode == RhsMode::Linear {
            return vec![vec![Complex64::new(0.0, 0.0); n_pts]; orbitals.len()];
        }
        let terms = self.terms(weights, orbitals);
        let nyquist = self.grid.nyquist_index();
        terms
            .into_par_iter()
            .map(|(direct, exchange)| {
                let mut out = match self.mode {
                    RhsMode::HartreeFock => direct
                        .iter()
                        .zip(&exchange)
                        .map(|(d, e)| d - e * self.exchange_sign)
                        .collect(),
                    _ => direct,
                };
                self.grid.fft_raw(&mut out);
                out[nyquist] = Complex64::new(0.0, 0.0);
                if let Some(mask) = &self.spectral_mask {
                    for (c, m) in out.iter_mut().zip(mask) {
                        *c *= *m;
                    }
                }
                out
            })
            .collect()
    }

    /// Nonlinearity in physical space for every orbital.
    pub fn apply(&self, weights: &[f64], orbitals: &[&[Complex64]]) -> Vec<Vec<Complex64>> {
        let inv_n = 1.0 / self.grid.n_points() as f64;
        self.apply_spectral(weights, orbitals)
            .into_par_iter()
            .map(|mut v| {
                self.grid.ifft_raw(&mut v);
                for c in v.iter_mut() {
                    *c *= inv_n;
                }
                v
            })
            .collect()
    }
}

fn slices(ens: &OrbitalEnsemble) -> Vec<&[Complex64]> {
    ens.orbitals().iter().map(|u| u.values()).collect()
}

fn wrap(grid: &Grid, fields: Vec<Vec<Complex64>>) -> Vec<ComplexField> {
    fields
        .into_iter()
        .map(|v| ComplexField::from_vec_unchecked(grid, v))
        .collect()
}

/// `(w * ρ) u_m` for every orbital.
pub fn direct_term(ens: &OrbitalEnsemble, w: &Potential) -> Vec<ComplexField> {
    let op = NonlinearOperator::new(ens.grid(), w, RhsMode::ReducedHartree);
    let terms = op.terms(ens.weights(), &slices(ens));
    wrap(ens.grid(), terms.into_iter().map(|(d, _)| d).collect())
}

/// `Σ_n α_n u_n (w * (ū_n u_m))` for every orbital.
pub fn exchange_term(ens: &OrbitalEnsemble, w: &Potential) -> Vec<ComplexField> {
    let op = NonlinearOperator::new(ens.grid(), w, RhsMode::HartreeFock);
    let terms = op.terms(ens.weights(), &slices(ens));
    wrap(ens.grid(), terms.into_iter().map(|(_, e)| e).collect())
}

/// Largest grid on which the dense exchange oracle may run.
pub const DENSE_ORACLE_MAX_POINTS: usize = 512;

/// Exchange term by direct `O(N² K)` quadrature of
/// `∫ w(x − y) k(x, y) u_m(y) dy` against a circulant kernel
/// `w_gridded[d] = w_per(d·dx)`.
pub fn exchange_dense_oracle(ens: &OrbitalEnsemble, w_gridded: &[f64]) -> Result<Vec<ComplexField>> {
    let grid = ens.grid();
    let n = grid.n_points();
    if n > DENSE_ORACLE_MAX_POINTS {
        return Err(Error::arg(format!(
            "dense oracle limited to {DENSE_ORACLE_MAX_POINTS} points, got {n}"
        )));
    }
    if w_gridded.len() != n {
        return Err(Error::arg("gridded kernel length differs from grid size"));
    }
    let dx = grid.dx();
    let k = ens.rank();
    let u: Vec<&[Complex64]> = slices(ens);
    let mut out = vec![vec![Complex64::new(0.0, 0.0); n]; k];
    for (m, out_m) in out.iter_mut().enumerate() {
        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                let kernel = w_gridded[(i + n - j) % n];
                if kernel == 0.0 {
                    continue;
                }
                // k(x_i, x_j) = Σ α_n u_n(x_i) ū_n(x_j)
                let mut kij = Complex64::new(0.0, 0.0);
                for (un, a) in u.iter().zip(ens.weights()) {
                    kij += un[i] * un[j].conj() * a;
                }
                acc += kij * u[m][j] * kernel;
            }
            out_m[i] = acc * dx;
        }
    }
    Ok(wrap(grid, out))
}

/// Convenience wrapper building the circulant kernel from `w`; rejects
/// atomic potentials.
pub fn exchange_dense_oracle_for(ens: &OrbitalEnsemble, w: &Potential) -> Result<Vec<ComplexField>> {
    let kernel = w.gridded_density(ens.grid())?;
    exchange_dense_oracle(ens, &kernel)
}

/// Nonlinear right-hand side `N(u)_m` of `i ∂_t u_m = −Δ u_m + N(u)_m`.
pub fn rhs(ens: &OrbitalEnsemble, w: &Potential, mode: RhsMode) -> Vec<ComplexField> {
    let op = NonlinearOperator::new(ens.grid(), w, mode);
    wrap(ens.grid(), op.apply(ens.weights(), &slices(ens)))
}

/// `Im Σ_m α_m ⟨u_m, N_m⟩`, which vanishes for a self-adjoint generator.
pub fn mass_production(ens: &OrbitalEnsemble, nonlinearity: &[ComplexField]) -> f64 {
    ens.weights()
        .iter()
        .zip(ens.orbitals())
        .zip(nonlinearity)
        .map(|((a, u), n)| a * u.inner_unchecked(n).im)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::gaussian_coefficients;
    use crate::potential::Atom;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn all_potentials() -> Vec<Potential> {
        vec![
            Potential::dirac(0.9),
            Potential::gaussian(1.0, 1.0).unwrap(),
            Potential::box_mass(-0.7, 1.5).unwrap(),
            Potential::dirac_sum(vec![
                Atom { mass: 0.5, shift: 0.75 },
                Atom {
                    mass: 0.5,
                    shift: -0.75,
                },
            ])
            .unwrap(),
        ]
    }

    fn random_ensemble(grid: &Grid, k: usize, seed: u64) -> OrbitalEnsemble {
        let weights: Vec<f64> = (0..k).map(|i| 1.0 / (1.0 + i as f64)).collect();
        // random combinations of modulated Gaussians, well resolved on the grid
        let orbitals = (0..k)
            .map(|i| {
                let g = gaussian_coefficients(4, seed + i as u64);
                ComplexField::from_fn(grid, |x| {
                    g.iter()
                        .enumerate()
                        .map(|(j, z)| {
                            let c = j as f64 - 1.5;
                            let phase = Complex64::from_polar(1.0, (j as f64 - 2.0) * x);
                            z * phase * (-(x - c) * (x - c) / 2.0).exp()
                        })
                        .sum()
                })
            })
            .collect();
        OrbitalEnsemble::new(weights, orbitals, 0.0).unwrap()
    }

    fn max_abs(fields: &[ComplexField]) -> f64 {
        fields.iter().map(|f| f.sup_norm()).fold(0.0, f64::max)
    }

    #[test]
    fn pair_index_enumerates_upper_triangle() {
        let k = 4;
        let mut expect = 0;
        for n in 0..k {
            for m in n..k {
                assert_eq!(NonlinearOperator::pair_index(k, n, m), expect);
                expect += 1;
            }
        }
    }

    #[test]
    fn zero_ensemble_gives_zero() {
        let g = Grid::new(32, 8.0).unwrap();
        let ens = OrbitalEnsemble::new(
            vec![1.0, 0.5],
            vec![ComplexField::zeros(&g), ComplexField::zeros(&g)],
            0.0,
        )
        .unwrap();
        let w = Potential::gaussian(1.0, 1.0).unwrap();
        assert_eq!(max_abs(&direct_term(&ens, &w)), 0.0);
        assert_eq!(max_abs(&exchange_term(&ens, &w)), 0.0);
        assert_eq!(max_abs(&rhs(&ens, &w, RhsMode::HartreeFock)), 0.0);
    }

    #[test]
    fn dirac_direct_term_is_local() {
        let g = Grid::new(64, 10.0).unwrap();
        let ens = random_ensemble(&g, 2, 3);
        let lambda = 1.7;
        let out = direct_term(&ens, &Potential::dirac(lambda));
        let rho = ens.density_values();
        for (m, f) in out.iter().enumerate() {
            for (j, v) in f.values().iter().enumerate() {
                let expect = ens.orbitals()[m].values()[j] * (lambda * rho[j]);
                assert!((v - expect).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn gaussian_direct_term_matches_fine_quadrature() {
        // u = e^{-x²/2}, ρ = e^{-x²}, w unit Gaussian: (w*ρ)(x) by 10⁶-point quadrature
        let g = Grid::new(512, 40.0).unwrap();
        let u = ComplexField::from_fn(&g, |x| c((-x * x / 2.0).exp()));
        let ens = OrbitalEnsemble::single(1.0, u.clone(), 0.0).unwrap();
        let w = Potential::gaussian(1.0, 1.0).unwrap();
        let out = &direct_term(&ens, &w)[0];
        let n_quad = 1_000_000;
        let (a, b) = (-20.0f64, 20.0f64);
        let h = (b - a) / n_quad as f64;
        for j in (0..g.n_points()).step_by(37) {
            let x = g.node(j);
            if x.abs() > 6.0 {
                continue;
            }
            let mut s = 0.0;
            for i in 0..n_quad {
                let y = a + (i as f64 + 0.5) * h;
                s += w.density_at(x - y).unwrap() * (-y * y).exp();
            }
            let expect = s * h * u.values()[j].re;
            assert!((out.values()[j].re - expect).abs() <= 1e-8 * expect.abs(), "x={x}");
        }
    }

    #[test]
    fn rank_one_exchange_equals_direct() {
        let g = Grid::new(64, 10.0).unwrap();
        for w in all_potentials() {
            let ens = random_ensemble(&g, 1, 9);
            let d = direct_term(&ens, &w);
            let e = exchange_term(&ens, &w);
            assert_eq!(d[0].values(), e[0].values(), "{w:?}");
            let r = rhs(&ens, &w, RhsMode::HartreeFock);
            assert_eq!(max_abs(&r), 0.0);
        }
    }

    #[test]
    fn fast_exchange_matches_dense_oracle() {
        let g = Grid::new(64, 16.0).unwrap();
        let ens = random_ensemble(&g, 3, 17);
        for w in [
            Potential::gaussian(1.0, 1.0).unwrap(),
            Potential::gaussian(-0.4, 0.6).unwrap(),
        ] {
            let fast = exchange_term(&ens, &w);
            let dense = exchange_dense_oracle_for(&ens, &w).unwrap();
            let scale = max_abs(&dense);
            for (a, b) in fast.iter().zip(&dense) {
                let err = a.sub(b).unwrap().sup_norm();
                assert!(err <= 1e-10 * scale, "err {err} scale {scale}");
            }
        }
        assert!(exchange_dense_oracle_for(&ens, &Potential::dirac(1.0)).is_err());
        let big = Grid::new(1024, 16.0).unwrap();
        let e = random_ensemble(&big, 1, 1);
        assert!(exchange_dense_oracle(&e, &vec![0.0; 1024]).is_err());
    }

    #[test]
    fn plane_wave_cancellation_and_reduced_contrast() {
        let g = Grid::new(64, 12.0).unwrap();
        let amps = [Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.25), c(0.15)];
        let weights = vec![1.0, 0.5, 2.0];
        let k = 3;
        let orbitals: Vec<ComplexField> = amps
            .iter()
            .map(|a| ComplexField::plane_wave(&g, k, *a).unwrap())
            .collect();
        let ens = OrbitalEnsemble::new(weights.clone(), orbitals, 0.0).unwrap();
        let amp3: f64 = amps.iter().map(|a| a.norm()).fold(0.0, f64::max).powi(3) * 2.0;
        for w in all_potentials() {
            let hf = rhs(&ens, &w, RhsMode::HartreeFock);
            assert!(max_abs(&hf) <= 1e-12 * amp3 * w.m1_norm().max(1.0), "{w:?}");
            let rh = rhs(&ens, &w, RhsMode::ReducedHartree);
            let density: f64 = weights.iter().zip(&amps).map(|(a, c)| a * c.norm_sqr()).sum();
            let factor = w.total_mass() * density;
            for (f, u) in rh.iter().zip(ens.orbitals()) {
                for (a, b) in f.values().iter().zip(u.values()) {
                    assert!((a - b * factor).norm() <= 1e-13);
                }
            }
            assert_eq!(max_abs(&rhs(&ens, &w, RhsMode::Linear)), 0.0);
        }
    }

    #[test]
    fn generator_is_self_adjoint() {
        let g = Grid::new(128, 20.0).unwrap();
        let ens = random_ensemble(&g, 3, 23);
        for w in all_potentials() {
            // scale from the direct term alone, since HF with a Dirac mass vanishes
            let direct = direct_term(&ens, &w);
            let scale: f64 = ens
                .weights()
                .iter()
                .zip(ens.orbitals())
                .zip(&direct)
                .map(|((a, u), f)| a * u.l2_norm() * f.l2_norm())
                .sum();
            for mode in [RhsMode::HartreeFock, RhsMode::ReducedHartree] {
                let n = rhs(&ens, &w, mode);
                let p = mass_production(&ens, &n);
                assert!(p.abs() <= 1e-12 * scale, "{mode:?} {w:?} {p} {scale}");
            }
            // N_m = h u_m for one self-adjoint h, so ⟨u_a, N_b⟩ = ⟨N_a, u_b⟩
            let n = rhs(&ens, &w, RhsMode::HartreeFock);
            let k = ens.rank();
            for a in 0..k {
                for b in 0..k {
                    let lhs = ens.orbitals()[a].inner_unchecked(&n[b]);
                    let rhs_v = n[a].inner_unchecked(&ens.orbitals()[b]);
                    assert!((lhs - rhs_v).norm() <= 1e-12 * scale.max(1.0), "{w:?} ({a},{b})");
                }
            }
        }
    }

    #[test]
    fn mode_names_round_trip() {
        for m in [RhsMode::HartreeFock, RhsMode::ReducedHartree, RhsMode::Linear] {
            assert_eq!(m.name().parse::<RhsMode>().unwrap(), m);
        }
        assert!("hartree".parse::<RhsMode>().is_err());
    }
}
