use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::OrbitalEnsemble;
use crate::grid::{forward_transform, free_propagate};
use crate::integrator::{boundary_mass_fraction, Trajectory};
use crate::{Error, Result};

/// Exponents and windows used by the fits and weighted norms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub alpha: f64,
    pub theta: f64,
    pub beta: f64,
    /// Weight exponent of `‖g‖_{H^{0,γ}}` in the dispersive check.
    pub gamma_exp: f64,
    /// Window `[t_lo, t_hi]` for decay and Cauchy fits.
    pub window: (f64, f64),
    /// Window for the trace-norm scattering fit.
    pub operator_window: (f64, f64),
    /// Window of probe times for the remainder fit.
    pub remainder_window: (f64, f64),
    /// Frequency at which the profile phase is tracked.
    pub phase_probe: f64,
    /// Relative half-step `h/s` of the finite-difference remainder.
    pub fd_step: f64,
    /// Fraction of the run (by time) excluded from the operator scattering
    /// series before the final anchor.
    pub tail_fraction: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            alpha: 0.05,
            theta: 0.5,
            beta: 0.125,
            gamma_exp: 1.0,
            window: (4.0, 64.0),
            operator_window: (8.0, 64.0),
            remainder_window: (4.0, 32.0),
            phase_probe: 0.0,
            fd_step: 0.01,
            tail_fraction: 0.5,
        }
    }
}

impl FitConfig {
    /// Upper limit `min(1/4, (1−θ)/(4(3−2θ)))` for `α`.
    pub fn alpha_limit(theta: f64) -> f64 {
        (0.25f64).min((1.0 - theta) / (4.0 * (3.0 - 2.0 * theta)))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta >= 0.0 && self.theta < 1.0) {
            return Err(Error::config("fit.theta", "must lie in [0, 1)"));
        }
        let limit = Self::alpha_limit(self.theta);
        if !(self.alpha > 0.0 && self.alpha < limit) {
            return Err(Error::config("fit.alpha", format!("must lie in (0, {limit})")));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::config("fit.beta", "must be positive"));
        }
        if !(self.gamma_exp > 0.5 + 2.0 * self.beta) {
            return Err(Error::config("fit.gamma_exp", "must exceed 1/2 + 2β"));
        }
        for (name, (lo, hi)) in [
            ("fit.window", self.window),
            ("fit.operator_window", self.operator_window),
            ("fit.remainder_window", self.remainder_window),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) {
                return Err(Error::config(name, "must satisfy 0 < t_lo < t_hi"));
            }
        }
        if !self.phase_probe.is_finite() {
            return Err(Error::config("fit.phase_probe", "must be finite"));
        }
        if !(self.fd_step > 0.0 && self.fd_step <= 0.1) {
            return Err(Error::config("fit.fd_step", "must lie in (0, 0.1]"));
        }
        if !(self.tail_fraction >= 0.0 && self.tail_fraction < 1.0) {
            return Err(Error::config("fit.tail_fraction", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Instantaneous norms of one snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `sup_x √ρ(x)`.
    pub sup_norm: f64,
    /// `Σ α_n ‖u_n‖²`.
    pub l2_mass: f64,
    /// `√(Σ α_n ‖∂_x u_n‖²)`.
    pub h10_x: f64,
    /// `√(Σ α_n ‖x Z_n‖²)` with `Z_n = e^{-itΔ} u_n`.
    pub h01_z: f64,
    /// `max |G(t) − G(t_0)|` over Gram entries.
    pub gram_drift: f64,
    pub boundary_mass_fraction: f64,
}

pub fn record(ens: &OrbitalEnsemble, reference: &OrbitalEnsemble, boundary_band: f64) -> DiagnosticsRecord {
    let grid = ens.grid();
    let sup_norm = ens.density_values().into_iter().fold(0.0, f64::max).sqrt();
    let mut h10 = 0.0;
    let mut h01 = 0.0;
    let nodes = grid.nodes();
    for (a, u) in ens.weights().iter().zip(ens.orbitals()) {
        let spec = forward_transform(u);
        let g: f64 = spec
            .coeffs()
            .iter()
            .zip(grid.frequencies())
            .map(|(c, xi)| xi * xi * c.norm_sqr())
            .sum();
        h10 += a * g * grid.dxi();
        let z = free_propagate(u, -ens.time());
        let m: f64 = z.values().iter().zip(&nodes).map(|(v, x)| x * x * v.norm_sqr()).sum();
        h01 += a * m * grid.dx();
    }
    DiagnosticsRecord {
        t: ens.time(),
        sup_norm,
        l2_mass: ens.trace_mass(),
        h10_x: h10.sqrt(),
        h01_z: h01.sqrt(),
        gram_drift: ens.gram_drift(reference),
        boundary_mass_fraction: boundary_mass_fraction(ens, boundary_band),
    }
}

/// One record per snapshot, relative to the first snapshot.
pub fn records(traj: &Trajectory, boundary_band: f64) -> Vec<DiagnosticsRecord> {
    let first = traj.first();
    traj.snapshots()
        .par_iter()
        .map(|s| record(s, first, boundary_band))
        .collect()
}

/// Components of the `X_T` norm: `sup t^{1/2}‖X‖_{L^∞L²_ω}`,
/// `sup t^{-α}‖X‖_{Ḣ^{1,0}L²_ω}`, `sup t^{-α}‖Z‖_{Ḣ^{0,1}L²_ω}` and
/// `sup ‖X‖_{L²L²_ω}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XtNorm {
    pub components: [f64; 4],
    pub combined: f64,
}

impl XtNorm {
    pub fn from_records(records: &[DiagnosticsRecord], fit: &FitConfig) -> Result<XtNorm> {
        if records.len() < 2 {
            return Err(Error::InsufficientData("X_T norm needs at least two snapshots".into()));
        }
        let mut c = [0.0f64; 4];
        for r in records {
            let decay = r.t.powf(-fit.alpha);
            c[0] = c[0].max(r.t.sqrt() * r.sup_norm);
            c[1] = c[1].max(decay * r.h10_x);
            c[2] = c[2].max(decay * r.h01_z);
            c[3] = c[3].max(r.l2_mass.sqrt());
        }
        Ok(XtNorm {
            components: c,
            combined: c.iter().sum(),
        })
    }
}

pub fn xt_norm(traj: &Trajectory, fit: &FitConfig) -> Result<XtNorm> {
    XtNorm::from_records(&records(traj, 0.125), fit)
}
