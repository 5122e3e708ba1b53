//! Finite-rank density matrices, viewed simultaneously as weighted orbital
//! families and as Gaussian random fields.
//!
//! For `X = Σ √α_n g_n u_n` with independent standard complex Gaussians
//! `g_n`, `E[ḡ_n g_m] = δ_nm`, so every expectation reduces to a weighted
//! orbital sum. Sampling ([`OrbitalEnsemble::sample_field`]) exists only to
//! cross-check that reduction.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::grid::{forward_transform, free_propagate, ComplexField, Grid};
use crate::{Error, Result};

/// Weighted orbital family `γ = Σ α_n |u_n⟩⟨u_n|` stamped at time `t`.
#[derive(Clone, Debug)]
pub struct OrbitalEnsemble {
    grid: Grid,
    weights: Vec<f64>,
    orbitals: Vec<ComplexField>,
    time: f64,
}

/// One realization `Σ √α_n g_n(ω) u_n` of the random field.
#[derive(Clone, Debug)]
pub struct GaussianSample {
    pub seed: u64,
    pub realization: ComplexField,
}

impl OrbitalEnsemble {
    pub fn new(weights: Vec<f64>, orbitals: Vec<ComplexField>, time: f64) -> Result<Self> {
        if orbitals.is_empty() {
            return Err(Error::InvalidEnsemble("at least one orbital is required".into()));
        }
        if weights.len() != orbitals.len() {
            return Err(Error::InvalidEnsemble(format!(
                "{} weights for {} orbitals",
                weights.len(),
                orbitals.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidEnsemble(format!("weight {w} is not a nonnegative real")));
        }
        if !time.is_finite() {
            return Err(Error::InvalidEnsemble("time stamp must be finite".into()));
        }
        let grid = orbitals[0].grid().clone();
        if orbitals.iter().any(|u| *u.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(OrbitalEnsemble {
            grid,
            weights,
            orbitals,
            time,
        })
    }

    /// Rank-one ensemble `α |u⟩⟨u|`.
    pub fn single(weight: f64, orbital: ComplexField, time: f64) -> Result<Self> {
        Self::new(vec![weight], vec![orbital], time)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn orbitals(&self) -> &[ComplexField] {
        &self.orbitals
    }

    pub fn rank(&self) -> usize {
        self.orbitals.len()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub(crate) fn with_orbitals(&self, orbitals: Vec<ComplexField>, time: f64) -> Self {
        OrbitalEnsemble {
            grid: self.grid.clone(),
            weights: self.weights.clone(),
            orbitals,
            time,
        }
    }

    /// `Σ α_n ‖u_n‖²`, the trace of `γ` and the `L²_x L²_ω` mass of `X`.
    pub fn trace_mass(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.orbitals)
            .map(|(a, u)| a * u.norm_sqr())
            .sum()
    }

    /// Gram matrix `G_nm = ⟨u_n, u_m⟩`.
    pub fn gram(&self) -> DMatrix<Complex64> {
        let k = self.rank();
        DMatrix::from_fn(k, k, |n, m| self.orbitals[n].inner_unchecked(&self.orbitals[m]))
    }

    /// Largest entrywise deviation between the Gram matrices of two ensembles.
    pub fn gram_drift(&self, reference: &OrbitalEnsemble) -> f64 {
        (self.gram() - reference.gram())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Particle density `ρ(x) = Σ α_n |u_n(x)|² = E|X(x)|²`.
    pub fn density_values(&self) -> Vec<f64> {
        let mut rho = vec![0.0; self.grid.n_points()];
        for (a, u) in self.weights.iter().zip(&self.orbitals) {
            for (r, v) in rho.iter_mut().zip(u.values()) {
                *r += a * v.norm_sqr();
            }
        }
        rho
    }

    pub fn density(&self) -> ComplexField {
        ComplexField::from_vec_unchecked(
            &self.grid,
            self.density_values()
                .into_iter()
                .map(|r| Complex64::new(r, 0.0))
                .collect(),
        )
    }

    /// `γ v = Σ α_n ⟨u_n, v⟩ u_n`.
    pub fn covariance_apply(&self, v: &ComplexField) -> Result<ComplexField> {
        if *v.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid.n_points()];
        for (a, u) in self.weights.iter().zip(&self.orbitals) {
            let c = u.inner_unchecked(v) * *a;
            for (o, x) in out.iter_mut().zip(u.values()) {
                *o += c * x;
            }
        }
        Ok(ComplexField::from_vec_unchecked(&self.grid, out))
    }

    /// `(Tr(⟨∇⟩γ), Tr(⟨x⟩γ))`, the first through the spectral multiplier `⟨ξ⟩`.
    pub fn weighted_traces(&self) -> (f64, f64) {
        let dxi = self.grid.dxi();
        let dx = self.grid.dx();
        let nodes = self.grid.nodes();
        let mut tr_grad = 0.0;
        let mut tr_x = 0.0;
        for (a, u) in self.weights.iter().zip(&self.orbitals) {
            if *a == 0.0 {
                continue;
            }
            let uh = forward_transform(u);
            let g: f64 = uh
                .coeffs()
                .iter()
                .zip(self.grid.frequencies())
                .map(|(c, xi)| (1.0 + xi * xi).sqrt() * c.norm_sqr())
                .sum();
            let x: f64 = u
                .values()
                .iter()
                .zip(&nodes)
                .map(|(v, x)| (1.0 + x * x).sqrt() * v.norm_sqr())
                .sum();
            tr_grad += a * g * dxi;
            tr_x += a * x * dx;
        }
        (tr_grad, tr_x)
    }

    /// Free flow applied to every orbital; the time stamp advances by `t`.
    pub fn free_propagate(&self, t: f64) -> OrbitalEnsemble {
        let orbitals = self.orbitals.iter().map(|u| free_propagate(u, t)).collect();
        self.with_orbitals(orbitals, self.time + t)
    }

    /// Complex-conjugated orbitals (the time-reversed state).
    pub fn conjugate(&self) -> OrbitalEnsemble {
        self.with_orbitals(self.orbitals.iter().map(|u| u.conj()).collect(), self.time)
    }

    /// Largest sup-norm over orbitals, scaled by `√α`.
    pub fn amplitude(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.orbitals)
            .map(|(a, u)| a.sqrt() * u.sup_norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.orbitals.iter().all(|u| u.is_finite())
    }

    /// Draws `g_n = (a + i b)/√2` with `a, b` standard normal from a seeded
    /// ChaCha stream and returns `Σ √α_n g_n u_n`.
    pub fn sample_field(&self, seed: u64) -> GaussianSample {
        let g = gaussian_coefficients(self.rank(), seed);
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid.n_points()];
        for ((a, u), gn) in self.weights.iter().zip(&self.orbitals).zip(g) {
            let c = gn * a.sqrt();
            for (o, x) in out.iter_mut().zip(u.values()) {
                *o += c * x;
            }
        }
        GaussianSample {
            seed,
            realization: ComplexField::from_vec_unchecked(&self.grid, out),
        }
    }
}

/// `count` independent standard complex Gaussians, deterministic in `seed`.
pub fn gaussian_coefficients(count: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    (0..count)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(a * scale, b * scale)
        })
        .collect()
}

/// Trace norm `‖γ_A − γ_B‖_{𝔖¹}`.
///
/// The difference `Σ s_i |v_i⟩⟨v_i|` (with `v_i = √α_i u_i`, `s_i = ±1`) has
/// rank at most `K_A + K_B`. The combined family is orthonormalized with
/// re-orthogonalized modified Gram-Schmidt (`V = Q R`), so the nonzero
/// spectrum of the difference is that of the small Hermitian matrix
/// `R S R*`, whose absolute eigenvalues are summed.
pub fn schatten1_distance(a: &OrbitalEnsemble, b: &OrbitalEnsemble) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let mut vectors: Vec<Vec<Complex64>> = Vec::with_capacity(a.rank() + b.rank());
    let mut signs = Vec::with_capacity(a.rank() + b.rank());
    for (ens, sign) in [(a, 1.0), (b, -1.0)] {
        for (w, u) in ens.weights.iter().zip(&ens.orbitals) {
            if *w > 0.0 {
                vectors.push(u.values().iter().map(|v| v * w.sqrt()).collect());
                signs.push(sign);
            }
        }
    }
    let r = orthonormal_coefficients(&vectors, a.grid.dx());
    let rank = r.nrows();
    if rank == 0 {
        return Ok(0.0);
    }
    let s = DMatrix::from_fn(signs.len(), signs.len(), |i, j| {
        if i == j {
            Complex64::new(signs[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let mut m = &r * s * r.adjoint();
    // symmetrize away roundoff before the Hermitian solver
    let mt = m.adjoint();
    m = (m + mt) * Complex64::new(0.5, 0.0);
    let eig = m.symmetric_eigen();
    Ok(eig.eigenvalues.iter().map(|l| l.abs()).sum())
}

/// Coefficient matrix `R` (rank × count) of `V = Q R` for an orthonormal `Q`,
/// with numerically dependent directions dropped.
fn orthonormal_coefficients(vectors: &[Vec<Complex64>], dx: f64) -> DMatrix<Complex64> {
    let count = vectors.len();
    let inner = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>() * dx
    };
    let scale = vectors.iter().map(|v| inner(v, v).re.sqrt()).fold(0.0, f64::max);
    let tol = 1e-13 * scale;
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let mut coeffs: Vec<Vec<Complex64>> = Vec::new(); // per basis vector, row of R
    let mut columns: Vec<Vec<Complex64>> = Vec::with_capacity(count);
    for v in vectors {
        let mut resid = v.clone();
        let mut col = vec![Complex64::new(0.0, 0.0); basis.len()];
        for _pass in 0..2 {
            for (j, q) in basis.iter().enumerate() {
                let c = inner(q, &resid);
                col[j] += c;
                for (r, qv) in resid.iter_mut().zip(q) {
                    *r -= c * qv;
                }
            }
        }
        let norm = inner(&resid, &resid).re.sqrt();
        if norm > tol {
            let q: Vec<Complex64> = resid.iter().map(|r| r / norm).collect();
            basis.push(q);
            col.push(Complex64::new(norm, 0.0));
        }
        columns.push(col);
    }
    let rank = basis.len();
    coeffs.resize(rank, vec![Complex64::new(0.0, 0.0); count]);
    for (j, col) in columns.iter().enumerate() {
        for (i, c) in col.iter().enumerate() {
            coeffs[i][j] = *c;
        }
    }
    DMatrix::from_fn(rank, count, |i, j| coeffs[i][j])
}
