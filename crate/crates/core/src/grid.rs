//! Periodic 1D grid and the spectral machinery built on it.
//!
//! Transforms are scaled to approximate the continuum transform
//! `f̂(ξ) = (2π)^{-1/2} ∫ e^{-ixξ} f(x) dx`, discretized as
//! `(2π)^{-1/2} dx Σ_j e^{-i x_j ξ_k} f(x_j)`. With that scaling the closed-form
//! `ŵ` of a potential and the `√(2π)` convolution factor apply literally.
//!
//! Spectral coefficients are stored in FFT order: slot `i < n/2` holds
//! `ξ = 2π i / L`, slot `i ≥ n/2` holds `ξ = 2π (i - n) / L`. Slot `n/2` is the
//! Nyquist mode.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::potential::Potential;
use crate::{Error, Result};

struct GridInner {
    n: usize,
    length: f64,
    dx: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    xi: Vec<f64>,
}

/// Uniform periodic grid on `[-L/2, L/2)` with its matched frequency lattice.
///
/// Cloning is cheap; FFT plans are shared.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n_points", &self.inner.n)
            .field("length", &self.inner.length)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.n == other.inner.n && self.inner.length.to_bits() == other.inner.length.to_bits())
    }
}

impl Grid {
    /// Builds a grid with `n_points` nodes (power of two, at least 8) on a
    /// domain of length `length`.
    pub fn new(n_points: usize, length: f64) -> Result<Self> {
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_points = {n_points} is not a power of two >= 8"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("length = {length} must be positive")));
        }
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(n_points);
        let inverse = planner.plan_fft_inverse(n_points);
        let xi = (0..n_points)
            .map(|i| {
                let k = if i < n_points / 2 {
                    i as f64
                } else {
                    i as f64 - n_points as f64
                };
                2.0 * PI * k / length
            })
            .collect();
        Ok(Grid {
            inner: Arc::new(GridInner {
                n: n_points,
                length,
                dx: length / n_points as f64,
                forward,
                inverse,
                xi,
            }),
        })
    }

    pub fn n_points(&self) -> usize {
        self.inner.n
    }

    pub fn length(&self) -> f64 {
        self.inner.length
    }

    pub fn dx(&self) -> f64 {
        self.inner.dx
    }

    /// Spacing of the frequency lattice, `2π / L`.
    pub fn dxi(&self) -> f64 {
        2.0 * PI / self.inner.length
    }

    /// Node `x_j = -L/2 + j dx`.
    pub fn node(&self, j: usize) -> f64 {
        -0.5 * self.inner.length + j as f64 * self.inner.dx
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.inner.n).map(|j| self.node(j)).collect()
    }

    /// Frequencies in storage (FFT) order.
    pub fn frequencies(&self) -> &[f64] {
        &self.inner.xi
    }

    pub fn nyquist_index(&self) -> usize {
        self.inner.n / 2
    }

    /// Storage slot of the lattice frequency `2π k / L`, for `k ∈ [-n/2, n/2)`.
    pub fn mode_index(&self, k: i64) -> Option<usize> {
        let n = self.inner.n as i64;
        if k < -n / 2 || k >= n / 2 {
            return None;
        }
        Some(k.rem_euclid(n) as usize)
    }

    /// Storage slot of the lattice frequency nearest to `xi`.
    pub fn nearest_mode(&self, xi: f64) -> usize {
        let n = self.inner.n as i64;
        let k = (xi / self.dxi()).round() as i64;
        k.clamp(-n / 2, n / 2 - 1).rem_euclid(n) as usize
    }

    /// 2/3-rule mask: 1 for `|k| < n/3`, 0 otherwise.
    pub fn dealias_mask(&self) -> Vec<f64> {
        let cutoff = self.inner.n as f64 / 3.0;
        self.inner
            .xi
            .iter()
            .map(|&xi| if (xi / self.dxi()).abs() < cutoff { 1.0 } else { 0.0 })
            .collect()
    }

    /// Factor applied to an unnormalized FFT to obtain continuum-scaled
    /// coefficients (without the `(-1)^k` seam phase).
    fn spectral_scale(&self) -> f64 {
        self.inner.dx / (2.0 * PI).sqrt()
    }

    /// In-place unnormalized forward FFT.
    pub fn fft_raw(&self, buf: &mut [Complex64]) {
        self.inner.forward.process(buf);
    }

    /// In-place unnormalized inverse FFT (no `1/n`).
    pub fn ifft_raw(&self, buf: &mut [Complex64]) {
        self.inner.inverse.process(buf);
    }

    /// Fourier multiplier `√(2π) ŵ(ξ_k)` in storage order.
    pub fn convolution_multiplier(&self, w: &Potential) -> Vec<f64> {
        let root = (2.0 * PI).sqrt();
        self.inner.xi.iter().map(|&xi| root * w.fourier_at(xi)).collect()
    }

    /// Free-flow phases `e^{-i t ξ_k²}` in storage order.
    pub fn free_phases(&self, t: f64) -> Vec<Complex64> {
        self.inner
            .xi
            .iter()
            .map(|&xi| Complex64::from_polar(1.0, -t * xi * xi))
            .collect()
    }

    /// Applies `conv(w, ·)` to a raw buffer through precomputed multiplier.
    pub(crate) fn convolve_raw(&self, multiplier: &[f64], buf: &mut [Complex64]) {
        self.fft_raw(buf);
        let inv_n = 1.0 / self.inner.n as f64;
        for (c, &m) in buf.iter_mut().zip(multiplier) {
            *c *= m * inv_n;
        }
        self.ifft_raw(buf);
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.inner.n {
            return Err(Error::arg(format!("expected {} values, got {len}", self.inner.n)));
        }
        Ok(())
    }
}

fn seam_sign(i: usize) -> f64 {
    if i.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Pointwise samples of a complex function on a [`Grid`].
#[derive(Clone, Debug)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: &Grid, values: Vec<Complex64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("field values".into()));
        }
        Ok(ComplexField {
            grid: grid.clone(),
            values,
        })
    }

    pub(crate) fn from_vec_unchecked(grid: &Grid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_points());
        ComplexField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::from_vec_unchecked(grid, vec![Complex64::new(0.0, 0.0); grid.n_points()])
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> Complex64) -> Self {
        Self::from_vec_unchecked(grid, grid.nodes().into_iter().map(f).collect())
    }

    /// The lattice plane wave `e^{i x ξ_k}`, `k ∈ [-n/2, n/2)`.
    pub fn plane_wave(grid: &Grid, k: i64, amplitude: Complex64) -> Result<Self> {
        let slot = grid
            .mode_index(k)
            .ok_or_else(|| Error::arg(format!("mode {k} outside the lattice")))?;
        let xi = grid.frequencies()[slot];
        Ok(Self::from_fn(grid, |x| amplitude * Complex64::from_polar(1.0, x * xi)))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Discrete inner product `⟨self, other⟩ = dx Σ conj(self) other`.
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self.inner_unchecked(other))
    }

    pub(crate) fn inner_unchecked(&self, other: &ComplexField) -> Complex64 {
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum();
        s * self.grid.dx()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn l2_norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, c: Complex64) -> ComplexField {
        Self::from_vec_unchecked(&self.grid, self.values.iter().map(|v| v * c).collect())
    }

    pub fn conj(&self) -> ComplexField {
        Self::from_vec_unchecked(&self.grid, self.values.iter().map(|v| v.conj()).collect())
    }

    /// `self - other`, pointwise.
    pub fn sub(&self, other: &ComplexField) -> Result<ComplexField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self::from_vec_unchecked(
            &self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        ))
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ComplexField) -> Result<ComplexField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self::from_vec_unchecked(
            &self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        ))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// Continuum-scaled Fourier coefficients on the frequency lattice.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: &Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        grid.check_len(coeffs.len())?;
        Ok(SpectralField {
            grid: grid.clone(),
            coeffs,
        })
    }

    pub(crate) fn from_vec_unchecked(grid: &Grid, coeffs: Vec<Complex64>) -> Self {
        SpectralField {
            grid: grid.clone(),
            coeffs,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Coefficients in storage (FFT) order.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient at lattice mode `k`.
    pub fn at_mode(&self, k: i64) -> Option<Complex64> {
        self.grid.mode_index(k).map(|i| self.coeffs[i])
    }

    /// `‖F‖² = Δξ Σ |F_k|²`.
    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dxi()
    }

    pub fn l2_norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.coeffs.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Continuum-scaled forward transform.
pub fn forward_transform(f: &ComplexField) -> SpectralField {
    let grid = f.grid();
    let mut buf = f.values().to_vec();
    grid.fft_raw(&mut buf);
    let scale = grid.spectral_scale();
    for (i, c) in buf.iter_mut().enumerate() {
        *c *= scale * seam_sign(i);
    }
    SpectralField::from_vec_unchecked(grid, buf)
}

/// Exact discrete inverse of [`forward_transform`].
pub fn inverse_transform(spec: &SpectralField) -> ComplexField {
    let grid = spec.grid();
    let scale = 1.0 / (grid.spectral_scale() * grid.n_points() as f64);
    let mut buf: Vec<Complex64> = spec
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| c * (scale * seam_sign(i)))
        .collect();
    grid.ifft_raw(&mut buf);
    ComplexField::from_vec_unchecked(grid, buf)
}

/// Forward transforms of a batch, in parallel, output in input order.
pub fn forward_batch(fields: &[ComplexField]) -> Vec<SpectralField> {
    fields.par_iter().map(forward_transform).collect()
}

pub fn inverse_batch(specs: &[SpectralField]) -> Vec<ComplexField> {
    specs.par_iter().map(inverse_transform).collect()
}

/// Multiplies coefficients by `e^{-i t ξ²}`.
pub fn free_propagate_spectral(spec: &SpectralField, t: f64) -> SpectralField {
    let grid = spec.grid();
    let coeffs = spec
        .coeffs()
        .iter()
        .zip(grid.frequencies())
        .map(|(c, &xi)| c * Complex64::from_polar(1.0, -t * xi * xi))
        .collect();
    SpectralField::from_vec_unchecked(grid, coeffs)
}

/// Free Schrödinger flow `e^{itΔ} f`.
pub fn free_propagate(f: &ComplexField, t: f64) -> ComplexField {
    if t == 0.0 {
        return f.clone();
    }
    inverse_transform(&free_propagate_spectral(&forward_transform(f), t))
}

/// `w * f`, computed as `F^{-1}(√(2π) ŵ f̂)`.
pub fn convolve(w: &Potential, f: &ComplexField) -> ComplexField {
    let grid = f.grid();
    let multiplier = grid.convolution_multiplier(w);
    let mut buf = f.values().to_vec();
    grid.convolve_raw(&multiplier, &mut buf);
    ComplexField::from_vec_unchecked(grid, buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn grid_basics() {
        let g = Grid::new(8, 8.0).unwrap();
        assert_eq!(g.dx(), 1.0);
        assert_eq!(g.node(0), -4.0);
        let mut xi: Vec<f64> = g.frequencies().to_vec();
        xi.sort_by(f64::total_cmp);
        for (j, v) in xi.iter().enumerate() {
            let k = j as f64 - 4.0;
            assert!((v - PI / 4.0 * k).abs() < 1e-15);
        }
        assert_eq!(Grid::new(16, 16.0).unwrap().dx(), 1.0);
        assert!(Grid::new(10, 8.0).is_err());
        assert!(Grid::new(4, 8.0).is_err());
        assert!(Grid::new(8, 0.0).is_err());
        assert!(Grid::new(8, -1.0).is_err());
    }

    #[test]
    fn lattice_is_symmetric_except_nyquist() {
        let g = Grid::new(32, 10.0).unwrap();
        for k in 1..16 {
            let a = g.frequencies()[g.mode_index(k).unwrap()];
            let b = g.frequencies()[g.mode_index(-k).unwrap()];
            assert_eq!(a, -b);
        }
        assert!(g.mode_index(16).is_none());
        assert!(g.frequencies()[g.nyquist_index()] < 0.0);
    }

    #[test]
    fn zero_transforms_to_zero() {
        let g = Grid::new(16, 4.0).unwrap();
        let z = ComplexField::zeros(&g);
        assert!(forward_transform(&z).coeffs().iter().all(|c| c.norm() == 0.0));
        let zs = SpectralField::new(&g, vec![c(0.0); 16]).unwrap();
        assert!(inverse_transform(&zs).values().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn gaussian_self_transform() {
        let g = Grid::new(1024, 64.0).unwrap();
        let f = ComplexField::from_fn(&g, |x| c((-x * x / 2.0).exp()));
        let fh = forward_transform(&f);
        for (coef, &xi) in fh.coeffs().iter().zip(g.frequencies()) {
            if xi.abs() <= 4.0 {
                let exact = (-xi * xi / 2.0).exp();
                assert!((coef - c(exact)).norm() <= 1e-10 * exact, "xi={xi}");
            }
        }
    }

    #[test]
    fn single_mode_inverse() {
        let g = Grid::new(16, 5.0).unwrap();
        let mut coeffs = vec![c(0.0); 16];
        let slot = g.mode_index(3).unwrap();
        coeffs[slot] = c(1.0);
        let f = inverse_transform(&SpectralField::new(&g, coeffs).unwrap());
        let xi = g.frequencies()[slot];
        let norm = g.dxi() / (2.0 * PI).sqrt();
        for (j, v) in f.values().iter().enumerate() {
            let expect = Complex64::from_polar(norm, g.node(j) * xi);
            assert!((v - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn free_gaussian_closed_form() {
        let g = Grid::new(1024, 64.0).unwrap();
        let f = ComplexField::from_fn(&g, |x| c((-x * x / 2.0).exp()));
        let out = free_propagate(&f, 1.0);
        let a = Complex64::new(1.0, 2.0);
        for (j, v) in out.values().iter().enumerate() {
            let x = g.node(j);
            if x.abs() < 16.0 {
                let exact = a.powf(-0.5) * (-(x * x) / (2.0 * a)).exp();
                assert!((v - exact).norm() <= 1e-8 * exact.norm().max(1e-300) + 1e-14);
            }
        }
        assert_eq!(free_propagate(&f, 0.0).values(), f.values());
    }

    #[test]
    fn free_propagate_on_grid_mode() {
        let g = Grid::new(64, 12.0).unwrap();
        let f = ComplexField::plane_wave(&g, 5, c(0.7)).unwrap();
        let xi = g.frequencies()[g.mode_index(5).unwrap()];
        let t = 0.37;
        let out = free_propagate(&f, t);
        let phase = Complex64::from_polar(1.0, -t * xi * xi);
        for (a, b) in out.values().iter().zip(f.values()) {
            assert!((a - b * phase).norm() < 1e-13);
        }
    }

    #[test]
    fn dirac_convolution_is_scaling() {
        let g = Grid::new(64, 10.0).unwrap();
        let f = ComplexField::from_fn(&g, |x| Complex64::new(x.sin(), (2.0 * x).cos()));
        let w = Potential::dirac(-1.5);
        let out = convolve(&w, &f);
        for (a, b) in out.values().iter().zip(f.values()) {
            assert!((a - b * -1.5).norm() < 1e-14);
        }
        let zero = convolve(&w, &ComplexField::zeros(&g));
        assert!(zero.sup_norm() == 0.0);
    }

    #[test]
    fn gaussian_convolution_adds_variances() {
        // N(0, s1²) * N(0, s2²) = N(0, s1² + s2²), with unit-mass densities.
        let g = Grid::new(512, 64.0).unwrap();
        let (s1, s2) = (1.0_f64, 0.7_f64);
        let density = |x: f64, s: f64| (-(x * x) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt());
        let f = ComplexField::from_fn(&g, |x| c(density(x, s2)));
        let out = convolve(&Potential::gaussian(1.0, s1).unwrap(), &f);
        let s = (s1 * s1 + s2 * s2).sqrt();
        for (j, v) in out.values().iter().enumerate() {
            let exact = density(g.node(j), s);
            assert!((v - c(exact)).norm() <= 1e-8 * exact + 1e-15);
        }
    }
}
