//! The profile remainder `R(s, ξ) = ∂_s Ẑ(s, ξ)` by three routes.
//!
//! Substituting `û = e^{-isξ²}Ẑ` in the Fourier form of the nonlinearity,
//! the phases collapse to `e^{2isησ}` and
//!
//! `R_m(s,ξ) = −i (2π)^{-1/2} ∫∫ e^{2isησ} F_m(s,η,σ,ξ) dη dσ`,
//!
//! `F_m = ŵ(η) Σ_n α_n Ẑ̄_n(ξ−σ−η) [Ẑ_n(ξ−σ) Ẑ_m(ξ−η) − Ẑ_m(ξ−σ) Ẑ_n(ξ−η)]`.
//!
//! Writing the bracket through its inverse transform `Ǧ(x, y)` in `(η, σ)`
//! gives
//!
//! `R_m = −i (2π)^{-1/2} (1/2s) ∫∫ ŵ(y/2s) e^{−ixy/2s} Ǧ(x, y) dx dy`,
//!
//! `Ǧ(x, y) = Ǧ₁(x, y) − Ǧ₁(y, x)`,
//! `Ǧ₁(x, y) = (2π)^{-1/2} e^{iξ(x+y)} ∫ e^{−iξa} Σ_n α_n Z̄_n(a) Z_n(a−y) Z_m(a−x) da`.
//!
//! Since `Ǧ` is antisymmetric the kernel may be antisymmetrized to
//! `e^{−ixy/2s}(ŵ(y/2s) − ŵ(x/2s))`, which vanishes on the diagonal and
//! equals `(ŵ(y/2s)e^{−ixy/2s} − ŵ(0)) − (x ↔ y)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::OrbitalEnsemble;
use crate::grid::{forward_transform, Grid};
use crate::nonlinearity::{rhs, RhsMode};
use crate::potential::{fourier_bound, Potential};
use crate::{Error, Result};

use super::profile::ProfileSnapshot;

/// Largest coarse grid accepted by [`remainder_quadrature`].
pub const COARSE_MAX_POINTS: usize = 64;

/// `sup_ξ √(Σ α_n |R_n(ξ)|²)`.
pub fn sup_aggregate(weights: &[f64], r: &[Vec<Complex64>]) -> f64 {
    aggregate(weights, r).into_iter().fold(0.0, f64::max)
}

fn aggregate(weights: &[f64], r: &[Vec<Complex64>]) -> Vec<f64> {
    let n = r.first().map_or(0, |v| v.len());
    (0..n)
        .map(|k| {
            weights
                .iter()
                .zip(r)
                .map(|(a, v)| a * v[k].norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Reference magnitude `‖w‖_{M¹} (max_n sup_ξ |Ẑ_n|)³ Σ α_n` for remainder
/// tolerances.
pub fn remainder_scale(profile: &ProfileSnapshot, w: &Potential) -> f64 {
    let z = profile.profiles.iter().map(|p| p.sup_norm()).fold(0.0, f64::max);
    w.m1_norm() * z.powi(3) * profile.weights.iter().sum::<f64>()
}

/// Central difference `(Ẑ_n(s+h) − Ẑ_n(s−h)) / 2h` per orbital, in storage
/// order.
pub fn remainder_fd_orbitals(minus: &ProfileSnapshot, plus: &ProfileSnapshot) -> Result<Vec<Vec<Complex64>>> {
    if minus.grid() != plus.grid() {
        return Err(Error::GridMismatch);
    }
    if minus.weights != plus.weights {
        return Err(Error::arg("profiles belong to different orbital families"));
    }
    let two_h = plus.t - minus.t;
    if two_h <= 0.0 {
        return Err(Error::arg("second profile must be later than the first"));
    }
    Ok(minus
        .profiles
        .iter()
        .zip(&plus.profiles)
        .map(|(a, b)| {
            a.coeffs()
                .iter()
                .zip(b.coeffs())
                .map(|(x, y)| (y - x) / two_h)
                .collect()
        })
        .collect())
}

/// `√(Σ α_n |R_n(s, ξ)|²)` over the lattice, from profiles at `s ± h`.
pub fn remainder_fd(minus: &ProfileSnapshot, plus: &ProfileSnapshot) -> Result<Vec<f64>> {
    Ok(aggregate(&minus.weights, &remainder_fd_orbitals(minus, plus)?))
}

/// `R_n = −i e^{isξ²} N̂_n(u(s))` straight from the equation.
pub fn remainder_exact(ens: &OrbitalEnsemble, w: &Potential, mode: RhsMode) -> Vec<Vec<Complex64>> {
    let s = ens.time();
    let grid = ens.grid().clone();
    rhs(ens, w, mode)
        .par_iter()
        .map(|n| {
            forward_transform(n)
                .coeffs()
                .iter()
                .zip(grid.frequencies())
                .map(|(c, &xi)| Complex64::new(0.0, -1.0) * Complex64::from_polar(1.0, s * xi * xi) * c)
                .collect()
        })
        .collect()
}

/// Samples the physical profiles `Z_n` on the nodes of `coarse`, which
/// must be a subset of the profile's grid nodes.
pub fn restrict_profile(profile: &ProfileSnapshot, coarse: &Grid) -> Result<Vec<Vec<Complex64>>> {
    let fine = profile.grid();
    let stride = coarse.dx() / fine.dx();
    let offset = (coarse.node(0) - fine.node(0)) / fine.dx();
    let is_int = |v: f64| (v - v.round()).abs() <= 1e-9 * v.abs().max(1.0);
    if !(is_int(stride) && is_int(offset) && stride >= 1.0 && offset >= 0.0) {
        return Err(Error::arg("coarse grid nodes are not a subset of the profile grid"));
    }
    let (stride, offset) = (stride.round() as usize, offset.round() as usize);
    if offset + stride * (coarse.n_points() - 1) >= fine.n_points() {
        return Err(Error::arg("coarse grid extends beyond the profile grid"));
    }
    Ok(profile
        .physical()
        .into_iter()
        .map(|z| {
            (0..coarse.n_points())
                .map(|i| z.values()[offset + stride * i])
                .collect()
        })
        .collect())
}

/// `R_m(s, ξ)` for the Hartree-Fock nonlinearity by direct quadrature of
/// the double integral above, on the coarse lattice frequencies (storage
/// order). Cost `O(n³ K)` per orbital and frequency block; `n` is limited
/// to [`COARSE_MAX_POINTS`].
pub fn remainder_quadrature(profile: &ProfileSnapshot, w: &Potential, coarse: &Grid) -> Result<Vec<Vec<Complex64>>> {
    let n = coarse.n_points();
    if n > COARSE_MAX_POINTS {
        return Err(Error::arg(format!(
            "quadrature remainder limited to {COARSE_MAX_POINTS} points, got {n}"
        )));
    }
    let s = profile.t;
    if !(s > 0.0) {
        return Err(Error::arg("remainder quadrature needs s > 0"));
    }
    let z = restrict_profile(profile, coarse)?;
    let weights = &profile.weights;
    let dx = coarse.dx();
    let nodes = coarse.nodes();
    let m_count = 2 * n - 1;
    let shift = (n - 1) as i64;
    let diff = |p: usize| (p as i64 - shift) as f64 * dx;
    let at = |v: &[Complex64], i: i64| -> Complex64 {
        if i >= 0 && (i as usize) < n {
            v[i as usize]
        } else {
            Complex64::new(0.0, 0.0)
        }
    };
    // Q(a_i, y_q) = Σ α Z̄_n(a_i) Z_n(a_i − y_q)
    let q_mat: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            (0..m_count)
                .map(|q| {
                    let j = i as i64 - (q as i64 - shift);
                    weights
                        .iter()
                        .zip(&z)
                        .map(|(a, zn)| zn[i].conj() * at(zn, j) * *a)
                        .sum()
                })
                .collect()
        })
        .collect();
    // antisymmetrized kernel
    let d_mat: Vec<Vec<Complex64>> = (0..m_count)
        .map(|p| {
            let x = diff(p);
            (0..m_count)
                .map(|q| {
                    let y = diff(q);
                    let dw = w.fourier_at(y / (2.0 * s)) - w.fourier_at(x / (2.0 * s));
                    Complex64::from_polar(dw, -x * y / (2.0 * s))
                })
                .collect()
        })
        .collect();
    let prefactor = Complex64::new(0.0, -1.0) * (dx * dx * dx / (2.0 * PI * 2.0 * s));
    let xis = coarse.frequencies().to_vec();
    let out = z
        .iter()
        .map(|zm| {
            xis.par_iter()
                .map(|&xi| {
                    let phase_a: Vec<Complex64> = nodes.iter().map(|a| Complex64::from_polar(1.0, -xi * a)).collect();
                    let phase_d: Vec<Complex64> =
                        (0..m_count).map(|p| Complex64::from_polar(1.0, xi * diff(p))).collect();
                    let mut total = Complex64::new(0.0, 0.0);
                    let mut row = vec![Complex64::new(0.0, 0.0); m_count];
                    for p in 0..m_count {
                        // A[p][i] = e^{-iξ a_i} Z_m(a_i − x_p), S[p][·] = A[p]·Q
                        row.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
                        let off = p as i64 - shift;
                        for i in 0..n {
                            let zv = at(zm, i as i64 - off);
                            if zv == Complex64::new(0.0, 0.0) {
                                continue;
                            }
                            let a = phase_a[i] * zv;
                            for (r, qv) in row.iter_mut().zip(&q_mat[i]) {
                                *r += a * qv;
                            }
                        }
                        let mut acc = Complex64::new(0.0, 0.0);
                        for q in 0..m_count {
                            acc += d_mat[p][q] * phase_d[q] * row[q];
                        }
                        total += acc * phase_d[p];
                    }
                    total * prefactor
                })
                .collect::<Vec<Complex64>>()
        })
        .collect();
    Ok(out)
}

/// Outcome of the stationary-point identity and antisymmetry checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FIdentityReport {
    /// `max_{ξ,m} |F_m(s, 0, 0, ξ)|`.
    pub f000_max: f64,
    /// `max |B(η,σ) + B(σ,η)|` over the samples, `B = F/ŵ(η)`.
    pub antisymmetry_max: f64,
    /// `max |F_m(s, η, σ, ξ)|` over the samples.
    pub sample_max: f64,
    /// `Σα (max_n sup|Ẑ_n|)³`, the natural size of `B`.
    pub bracket_scale: f64,
    /// `bracket_scale · sup|ŵ|`, the natural size of `F`.
    pub f_scale: f64,
    pub samples: usize,
}

/// Evaluates `F` on the lattice: at `η = σ = 0` for every `ξ` and orbital,
/// and at `samples` random lattice triples `(η, σ, ξ)` drawn from a seeded
/// stream. Profile values off the lattice range count as zero.
pub fn f_identity_check(profile: &ProfileSnapshot, w: &Potential, samples: usize, seed: u64) -> FIdentityReport {
    let grid = profile.grid();
    let n = grid.n_points() as i64;
    let dxi = grid.dxi();
    let z = |orb: usize, k: i64| -> Complex64 {
        grid.mode_index(k)
            .map_or(Complex64::new(0.0, 0.0), |i| profile.profiles[orb].coeffs()[i])
    };
    let weights = &profile.weights;
    let bracket = |m: usize, k: i64, j: i64, l: i64| -> Complex64 {
        // B_m(η_j, σ_l, ξ_k)
        let mut first = Complex64::new(0.0, 0.0);
        let mut second = Complex64::new(0.0, 0.0);
        for (orb, a) in weights.iter().enumerate() {
            let c = z(orb, k - l - j).conj();
            first += (c * z(orb, k - l)) * z(m, k - j) * *a;
            second += (c * z(m, k - l)) * z(orb, k - j) * *a;
        }
        first - second
    };
    let w0 = w.fourier_at(0.0);
    let mut f000_max: f64 = 0.0;
    for m in 0..profile.rank() {
        for k in -n / 2..n / 2 {
            f000_max = f000_max.max((bracket(m, k, 0, 0) * w0).norm());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut antisymmetry_max: f64 = 0.0;
    let mut sample_max: f64 = 0.0;
    for _ in 0..samples {
        let k = rng.random_range(-n / 2..n / 2);
        let j = rng.random_range(-n / 4..n / 4);
        let l = rng.random_range(-n / 4..n / 4);
        let m = rng.random_range(0..profile.rank());
        let b = bracket(m, k, j, l);
        let swapped = bracket(m, k, l, j);
        antisymmetry_max = antisymmetry_max.max((b + swapped).norm());
        sample_max = sample_max.max((b * w.fourier_at(j as f64 * dxi)).norm());
    }
    let zmax = profile.profiles.iter().map(|p| p.sup_norm()).fold(0.0, f64::max);
    let bracket_scale = weights.iter().sum::<f64>() * zmax.powi(3);
    FIdentityReport {
        f000_max,
        antisymmetry_max,
        sample_max,
        bracket_scale,
        f_scale: bracket_scale * fourier_bound(w),
        samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::profile::profile;
    use crate::grid::ComplexField;

    /// Two smooth, non-orthogonal, modulated packets at time `s`.
    fn state(grid: &Grid, s: f64, amp: f64) -> OrbitalEnsemble {
        let u = ComplexField::from_fn(grid, |x| {
            Complex64::from_polar(amp * (-(x - 0.3) * (x - 0.3) / 2.0).exp(), 0.7 * x)
        });
        let v = ComplexField::from_fn(grid, |x| {
            Complex64::new(amp * x * (-x * x / 1.6).exp(), 0.2 * amp * (-x * x).exp())
        });
        OrbitalEnsemble::new(vec![1.0, 0.6], vec![u, v], 0.0)
            .unwrap()
            .free_propagate(s)
    }

    #[test]
    fn quadrature_matches_equation() {
        let fine = Grid::new(1024, 128.0).unwrap();
        let coarse = Grid::new(64, 16.0).unwrap();
        for w in [
            Potential::gaussian(1.0, 1.0).unwrap(),
            Potential::box_mass(0.8, 0.7).unwrap(),
        ] {
            for s in [2.0, 4.0] {
                let ens = state(&fine, s, 0.5);
                let p = profile(&ens);
                let exact = remainder_exact(&ens, &w, RhsMode::HartreeFock);
                let quad = remainder_quadrature(&p, &w, &coarse).unwrap();
                let scale = sup_aggregate(ens.weights(), &exact);
                let mut worst: f64 = 0.0;
                for (qm, em) in quad.iter().zip(&exact) {
                    for (k, &xi) in coarse.frequencies().iter().enumerate() {
                        let e = em[fine.nearest_mode(xi)];
                        worst = worst.max((qm[k] - e).norm());
                    }
                }
                assert!(worst <= 1e-6 * scale, "{w:?} s={s}: {worst:e} vs {scale:e}");
            }
        }
    }

    #[test]
    fn quadrature_guards_and_plane_waves() {
        let fine = Grid::new(256, 64.0).unwrap();
        let ens = state(&fine, 1.0, 0.5);
        let p = profile(&ens);
        let w = Potential::gaussian(1.0, 1.0).unwrap();
        assert!(remainder_quadrature(&p, &w, &Grid::new(128, 32.0).unwrap()).is_err());
        // dx 0.3 is not a multiple of the fine spacing
        assert!(remainder_quadrature(&p, &w, &Grid::new(64, 19.2).unwrap()).is_err());
        let zero = OrbitalEnsemble::new(vec![1.0], vec![ComplexField::zeros(&fine)], 1.0).unwrap();
        let rz = remainder_quadrature(&profile(&zero), &w, &Grid::new(32, 8.0).unwrap()).unwrap();
        assert!(rz.iter().flatten().all(|c| c.norm() == 0.0));
        // plane waves sharing one mode: the bracket vanishes identically
        let k = 4;
        let orbitals = [Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.2)]
            .iter()
            .map(|a| ComplexField::plane_wave(&fine, k, *a).unwrap())
            .collect();
        let pw = OrbitalEnsemble::new(vec![1.0, 0.5], orbitals, 0.0)
            .unwrap()
            .free_propagate(2.0);
        let rq = remainder_quadrature(&profile(&pw), &w, &Grid::new(32, 8.0).unwrap()).unwrap();
        assert!(
            rq.iter().flatten().all(|c| c.norm() <= 1e-14),
            "{:e}",
            sup_aggregate(&[1.0, 0.5], &rq)
        );
    }

    #[test]
    fn finite_difference_tracks_equation() {
        use crate::integrator::{evolve, IntegratorConfig};
        let fine = Grid::new(512, 128.0).unwrap();
        let w = Potential::gaussian(1.0, 1.0).unwrap();
        let ens = state(&fine, 1.0, 0.5);
        let s = 2.0;
        let h = 0.01 * s;
        let c = IntegratorConfig {
            t_end: 3.0,
            dt: 0.01,
            extra_times: vec![s - h, s, s + h],
            ..IntegratorConfig::default()
        };
        let traj = evolve(&c, &ens, &w, RhsMode::HartreeFock).unwrap();
        let fd = remainder_fd_orbitals(
            &profile(traj.at_time(s - h).unwrap()),
            &profile(traj.at_time(s + h).unwrap()),
        )
        .unwrap();
        let exact = remainder_exact(traj.at_time(s).unwrap(), &w, RhsMode::HartreeFock);
        let scale = sup_aggregate(ens.weights(), &exact);
        let err: Vec<Vec<Complex64>> = fd
            .iter()
            .zip(&exact)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        assert!(sup_aggregate(ens.weights(), &err) <= 1e-3 * scale);
        // linear profiles do not move
        let lin = evolve(&c, &ens, &w, RhsMode::Linear).unwrap();
        let fd_lin = remainder_fd(
            &profile(lin.at_time(s - h).unwrap()),
            &profile(lin.at_time(s + h).unwrap()),
        )
        .unwrap();
        assert!(fd_lin.iter().all(|v| *v <= 1e-8 * scale.max(1e-3)));
    }

    #[test]
    fn f_identity_holds() {
        let fine = Grid::new(256, 64.0).unwrap();
        let p = profile(&state(&fine, 3.0, 0.8));
        for w in [Potential::gaussian(1.0, 1.0).unwrap(), Potential::dirac(2.0)] {
            let r = f_identity_check(&p, &w, 500, 7);
            assert!(r.f000_max <= 1e-14 * r.f_scale, "{r:?}");
            assert!(r.antisymmetry_max <= 1e-14 * r.bracket_scale, "{r:?}");
            assert!(r.sample_max > 0.0);
        }
        let none = f_identity_check(&p, &Potential::gaussian(0.0, 1.0).unwrap(), 200, 7);
        assert_eq!(none.f000_max, 0.0);
        assert_eq!(none.sample_max, 0.0);
    }
}
