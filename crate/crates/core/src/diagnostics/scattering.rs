use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{schatten1_distance, OrbitalEnsemble};
use crate::grid::{inverse_transform, SpectralField};
use crate::integrator::Trajectory;
use crate::{Error, Result};

use super::fit::least_squares;
use super::norms::FitConfig;
use super::profile::ProfileSnapshot;

/// Profile distances between two times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyDistances {
    pub t1: f64,
    pub t2: f64,
    /// `‖ΔẐ‖_{L^∞_ξ L²_ω}`.
    pub d_inf: f64,
    /// `‖ΔẐ‖_{H^{θ,0}_ξ L²_ω}`, i.e. `‖⟨x⟩^θ ΔZ‖`.
    pub d_theta0: f64,
    /// `‖ΔẐ‖_{H^{0,θ}_ξ L²_ω}`, i.e. `‖⟨ξ⟩^θ ΔẐ‖`.
    pub d_0theta: f64,
}

fn check_compatible(p1: &ProfileSnapshot, p2: &ProfileSnapshot) -> Result<()> {
    if p1.grid() != p2.grid() {
        return Err(Error::GridMismatch);
    }
    if p1.rank() != p2.rank() || p1.weights != p2.weights {
        return Err(Error::arg("profiles belong to different orbital families"));
    }
    Ok(())
}

pub fn scattering_cauchy(p1: &ProfileSnapshot, p2: &ProfileSnapshot, fit: &FitConfig) -> Result<CauchyDistances> {
    check_compatible(p1, p2)?;
    let grid = p1.grid();
    let n = grid.n_points();
    let theta = fit.theta;
    let mut pointwise = vec![0.0; n];
    let mut x_weighted = 0.0;
    let mut xi_weighted = 0.0;
    let nodes = grid.nodes();
    for ((a, z1), z2) in p1.weights.iter().zip(&p1.profiles).zip(&p2.profiles) {
        let diff: Vec<_> = z2.coeffs().iter().zip(z1.coeffs()).map(|(b, c)| b - c).collect();
        for ((p, d), xi) in pointwise.iter_mut().zip(&diff).zip(grid.frequencies()) {
            let m = d.norm_sqr();
            *p += a * m;
            xi_weighted += a * (1.0 + xi * xi).powf(theta) * m * grid.dxi();
        }
        let dz = inverse_transform(&SpectralField::new(grid, diff)?);
        let s: f64 = dz
            .values()
            .iter()
            .zip(&nodes)
            .map(|(v, x)| (1.0 + x * x).powf(theta) * v.norm_sqr())
            .sum();
        x_weighted += a * s * grid.dx();
    }
    Ok(CauchyDistances {
        t1: p1.t,
        t2: p2.t,
        d_inf: pointwise.into_iter().fold(0.0, f64::max).sqrt(),
        d_theta0: x_weighted.sqrt(),
        d_0theta: xi_weighted.sqrt(),
    })
}

/// Log-time fit of the unwrapped phase of one orbital's profile at a probe
/// frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDrift {
    pub slope: f64,
    pub stderr: f64,
    pub orbital: usize,
    pub xi: f64,
    pub phases: Vec<(f64, f64)>,
}

/// Tracks `arg Ẑ_m(t, ξ)` on the lattice frequency nearest to `xi_probe`,
/// for the orbital `m` carrying the most weight there at the first
/// snapshot, and fits it against `log t`.
pub fn phase_drift(series: &[ProfileSnapshot], xi_probe: f64) -> Result<PhaseDrift> {
    if series.len() < 3 {
        return Err(Error::InsufficientData(
            "phase fit needs at least three snapshots".into(),
        ));
    }
    let grid = series[0].grid();
    let k = grid.nearest_mode(xi_probe);
    let xi = grid.frequencies()[k];
    let first = &series[0];
    let orbital = (0..first.rank())
        .max_by(|&a, &b| {
            let wa = first.weights[a] * first.profiles[a].coeffs()[k].norm_sqr();
            let wb = first.weights[b] * first.profiles[b].coeffs()[k].norm_sqr();
            wa.total_cmp(&wb).then(b.cmp(&a))
        })
        .unwrap_or(0);
    let scale = series
        .iter()
        .map(|p| p.profiles[orbital].sup_norm())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        // identically zero data carries no phase
        return Ok(PhaseDrift {
            slope: 0.0,
            stderr: 0.0,
            orbital,
            xi,
            phases: series.iter().map(|p| (p.t, 0.0)).collect(),
        });
    }
    let mut phases = Vec::with_capacity(series.len());
    let mut prev: Option<f64> = None;
    for p in series {
        check_compatible(first, p)?;
        let z = p.profiles[orbital].coeffs()[k];
        if z.norm() < 1e-3 * scale {
            return Err(Error::arg(format!(
                "probe amplitude {:.3e} at ξ = {xi} too small (scale {scale:.3e}) at t = {}",
                z.norm(),
                p.t
            )));
        }
        let mut phi = z.arg();
        if let Some(q) = prev {
            phi += 2.0 * PI * ((q - phi) / (2.0 * PI)).round();
        }
        prev = Some(phi);
        phases.push((p.t, phi));
    }
    let x: Vec<f64> = phases.iter().map(|(t, _)| t.ln()).collect();
    let y: Vec<f64> = phases.iter().map(|(_, p)| *p).collect();
    let (slope, stderr, _) = least_squares(&x, &y);
    Ok(PhaseDrift {
        slope,
        stderr,
        orbital,
        xi,
        phases,
    })
}

/// Trace-norm distance to the free evolution of the estimated asymptotic
/// state.
#[derive(Clone, Debug)]
pub struct OperatorScattering {
    pub t_anchor: f64,
    /// `γ∞ = Σ α_n |W_n⟩⟨W_n|` with `W_n` the last profile, stamped at 0.
    pub gamma_infty: OrbitalEnsemble,
    pub distances: Vec<(f64, f64)>,
}

/// Estimates `W_n` by the last snapshot's profile and reports
/// `‖γ(t) − e^{itΔ}γ∞‖_{𝔖¹}` for the snapshots with
/// `t ≤ (1 − tail_fraction)·t_last`.
pub fn operator_scattering(traj: &Trajectory, tail_fraction: f64) -> Result<OperatorScattering> {
    if traj.len() < 4 {
        return Err(Error::InsufficientData(
            "operator scattering needs at least four snapshots".into(),
        ));
    }
    if !(0.0..1.0).contains(&tail_fraction) {
        return Err(Error::arg("tail_fraction must lie in [0, 1)"));
    }
    let last = traj.last();
    let t_anchor = last.time();
    let gamma_infty = last.free_propagate(-t_anchor);
    let cutoff = t_anchor * (1.0 - tail_fraction);
    let distances = traj
        .snapshots()
        .par_iter()
        .filter(|s| s.time() <= cutoff * (1.0 + 1e-12) && s.time() < t_anchor)
        .map(|s| {
            let free = gamma_infty.free_propagate(s.time());
            schatten1_distance(s, &free).map(|d| (s.time(), d))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OperatorScattering {
        t_anchor,
        gamma_infty,
        distances,
    })
}
