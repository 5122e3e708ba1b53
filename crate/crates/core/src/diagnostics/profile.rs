use num_complex::Complex64;
use rayon::prelude::*;

use crate::ensemble::OrbitalEnsemble;
use crate::grid::{forward_transform, inverse_transform, ComplexField, Grid, SpectralField};
use crate::integrator::Trajectory;
use crate::Result;

/// Fourier profiles `Ẑ_n(t, ξ) = e^{itξ²} û_n(t, ξ)` of one snapshot.
#[derive(Clone, Debug)]
pub struct ProfileSnapshot {
    pub t: f64,
    pub weights: Vec<f64>,
    pub profiles: Vec<SpectralField>,
}

/// Pulls the snapshot back by the free flow.
pub fn profile(ens: &OrbitalEnsemble) -> ProfileSnapshot {
    let t = ens.time();
    let profiles = ens
        .orbitals()
        .par_iter()
        .map(|u| {
            let mut spec = forward_transform(u);
            let grid = spec.grid().clone();
            for (c, &xi) in spec.coeffs_mut().iter_mut().zip(grid.frequencies()) {
                *c *= Complex64::from_polar(1.0, t * xi * xi);
            }
            spec
        })
        .collect();
    ProfileSnapshot {
        t,
        weights: ens.weights().to_vec(),
        profiles,
    }
}

pub fn profiles(traj: &Trajectory) -> Vec<ProfileSnapshot> {
    traj.snapshots().iter().map(profile).collect()
}

impl ProfileSnapshot {
    pub fn grid(&self) -> &Grid {
        self.profiles[0].grid()
    }

    pub fn rank(&self) -> usize {
        self.profiles.len()
    }

    /// Physical-space profiles `Z_n = e^{-itΔ} u_n`.
    pub fn physical(&self) -> Vec<ComplexField> {
        self.profiles.iter().map(inverse_transform).collect()
    }

    /// Profiles as an ensemble stamped at time 0.
    pub fn as_ensemble(&self) -> Result<OrbitalEnsemble> {
        OrbitalEnsemble::new(self.weights.clone(), self.physical(), 0.0)
    }

    /// `√(Σ α_n |Ẑ_n(ξ)|²)` at every lattice frequency.
    pub fn aggregate(&self) -> Vec<f64> {
        let n = self.grid().n_points();
        (0..n)
            .map(|k| {
                self.weights
                    .iter()
                    .zip(&self.profiles)
                    .map(|(a, p)| a * p.coeffs()[k].norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    /// `sup_ξ √(Σ α_n |Ẑ_n(ξ)|²)`.
    pub fn sup_aggregate(&self) -> f64 {
        self.aggregate().into_iter().fold(0.0, f64::max)
    }
}
