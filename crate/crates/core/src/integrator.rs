//! Time stepping for `i ∂_t u_m = −Δ u_m + N(u)_m`.
//!
//! The state is carried as raw (unnormalized) FFT coefficients. The free flow
//! is applied exactly as a Fourier multiplier; the nonlinearity enters either
//! through an integrating-factor Runge-Kutta scheme (Lawson's IFRK4) or a
//! Strang splitting whose nonlinear substep is solved by implicit midpoint.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::OrbitalEnsemble;
use crate::grid::{free_propagate, ComplexField, Grid};
use crate::nonlinearity::{NonlinearOperator, RhsMode};
use crate::potential::Potential;
use crate::{Error, Result};

/// Boundary mass fraction above which a wrap-around warning is raised.
pub const WRAP_WARNING_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "ifrk4", alias = "IFRK4")]
    Ifrk4,
    #[serde(rename = "strang2", alias = "Strang2")]
    Strang2,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Ifrk4 => "ifrk4",
            Scheme::Strang2 => "strang2",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketKind {
    /// Hermite-Gaussian `amplitude · ψ_d((x − x₀)/σ) e^{iξ₀x}`, normalized so
    /// that `amplitude` is its `L²` norm.
    #[default]
    Gaussian,
    /// `amplitude · e^{iξ_k x}` on the lattice mode nearest to `frequency`;
    /// `amplitude` is the pointwise modulus.
    PlaneWave,
}

/// One orbital of the initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavePacket {
    pub weight: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub center: f64,
    #[serde(default)]
    pub frequency: f64,
    #[serde(default = "one")]
    pub width: f64,
    #[serde(default)]
    pub hermite: u32,
    #[serde(default)]
    pub kind: PacketKind,
}

fn one() -> f64 {
    1.0
}

impl WavePacket {
    pub fn gaussian(weight: f64, amplitude: f64, center: f64, frequency: f64, width: f64) -> Self {
        WavePacket {
            weight,
            amplitude,
            center,
            frequency,
            width,
            hermite: 0,
            kind: PacketKind::Gaussian,
        }
    }

    pub fn with_hermite(mut self, degree: u32) -> Self {
        self.hermite = degree;
        self
    }

    pub fn plane_wave(weight: f64, amplitude: f64, frequency: f64) -> Self {
        WavePacket {
            weight,
            amplitude,
            center: 0.0,
            frequency,
            width: 1.0,
            hermite: 0,
            kind: PacketKind::PlaneWave,
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        let field = |name: &str| format!("initial.packets[{index}].{name}");
        for (name, v) in [
            ("weight", self.weight),
            ("amplitude", self.amplitude),
            ("center", self.center),
            ("frequency", self.frequency),
            ("width", self.width),
        ] {
            if !v.is_finite() {
                return Err(Error::config(field(name), "must be finite"));
            }
        }
        if self.weight < 0.0 {
            return Err(Error::config(field("weight"), "must be nonnegative"));
        }
        if self.width <= 0.0 {
            return Err(Error::config(field("width"), "must be positive"));
        }
        if self.hermite > 64 {
            return Err(Error::config(field("hermite"), "degree above 64 is not supported"));
        }
        Ok(())
    }

    /// Samples the packet at time 0.
    pub fn sample(&self, grid: &Grid) -> ComplexField {
        match self.kind {
            PacketKind::PlaneWave => {
                let k = (self.frequency / grid.dxi()).round() as i64;
                let n = grid.n_points() as i64;
                let k = k.clamp(-n / 2 + 1, n / 2 - 1);
                let xi = k as f64 * grid.dxi();
                ComplexField::from_fn(grid, |x| Complex64::from_polar(self.amplitude, xi * x))
            }
            PacketKind::Gaussian => {
                let scale = self.amplitude / self.width.sqrt();
                ComplexField::from_fn(grid, |x| {
                    let y = (x - self.center) / self.width;
                    Complex64::from_polar(scale * hermite_function(self.hermite, y), self.frequency * x)
                })
            }
        }
    }
}

/// `L²`-normalized Hermite function `ψ_d(y) = (2^d d! √π)^{-1/2} H_d(y) e^{-y²/2}`.
pub fn hermite_function(degree: u32, y: f64) -> f64 {
    let g = (-0.5 * y * y).exp();
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * g;
    for d in 0..degree {
        let d = d as f64;
        let next = (2.0 / (d + 1.0)).sqrt() * y * cur - (d / (d + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Initial data `X₀` as a list of packets, one orbital each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub packets: Vec<WavePacket>,
}

impl InitialData {
    pub fn validate(&self) -> Result<()> {
        if self.packets.is_empty() {
            return Err(Error::config("initial.packets", "at least one packet is required"));
        }
        for (i, p) in self.packets.iter().enumerate() {
            p.validate(i)?;
        }
        Ok(())
    }

    /// Multiplies every packet amplitude by `factor`.
    pub fn scaled(&self, factor: f64) -> InitialData {
        InitialData {
            packets: self
                .packets
                .iter()
                .map(|p| WavePacket {
                    amplitude: p.amplitude * factor,
                    ..p.clone()
                })
                .collect(),
        }
    }
}

/// Builds `X₀` and returns `e^{i t_start Δ} X₀` stamped at `t_start`.
pub fn prepare_initial(data: &InitialData, grid: &Grid, t_start: f64) -> Result<OrbitalEnsemble> {
    data.validate()?;
    let weights = data.packets.iter().map(|p| p.weight).collect();
    let orbitals = data.packets.iter().map(|p| p.sample(grid)).collect();
    let x0 = OrbitalEnsemble::new(weights, orbitals, 0.0)?;
    Ok(x0.free_propagate(t_start))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub t_start: f64,
    pub t_end: f64,
    /// Ratio of the geometric snapshot schedule.
    pub snapshot_ratio: f64,
    /// Additional snapshot times (e.g. finite-difference probes).
    #[serde(default)]
    pub extra_times: Vec<f64>,
    #[serde(default)]
    pub dealias: bool,
    /// Width of each outer band, as a fraction of `L`, used by the
    /// wrap-around monitor.
    #[serde(default = "default_boundary_band")]
    pub boundary_band: f64,
}

fn default_boundary_band() -> f64 {
    0.125
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 0.05,
            scheme: Scheme::Ifrk4,
            t_start: 1.0,
            t_end: 128.0,
            snapshot_ratio: std::f64::consts::SQRT_2,
            extra_times: Vec::new(),
            dealias: false,
            boundary_band: default_boundary_band(),
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0 && self.dt <= 0.1) {
            return Err(Error::config("integrator.dt", "must lie in (0, 0.1]"));
        }
        if !(self.t_start.is_finite() && self.t_start >= 1.0) {
            return Err(Error::config("integrator.t_start", "must be at least 1"));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.t_start) {
            return Err(Error::config("integrator.t_end", "must be at least t_start"));
        }
        if !(self.snapshot_ratio.is_finite() && self.snapshot_ratio > 1.0) {
            return Err(Error::config("integrator.snapshot_ratio", "must exceed 1"));
        }
        if self.extra_times.iter().any(|t| !t.is_finite()) {
            return Err(Error::config("integrator.extra_times", "must be finite"));
        }
        if !(self.boundary_band > 0.0 && self.boundary_band < 0.5) {
            return Err(Error::config("integrator.boundary_band", "must lie in (0, 0.5)"));
        }
        Ok(())
    }

    /// Sorted snapshot times: `t_start r^j` below `t_end`, then `t_end`, plus
    /// any extra times inside `[t_start, t_end]`.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let mut times = Vec::new();
        let mut j = 0;
        loop {
            let t = self.t_start * self.snapshot_ratio.powi(j);
            if t >= self.t_end * (1.0 - 1e-12) {
                break;
            }
            times.push(t);
            j += 1;
        }
        times.push(self.t_end);
        times.extend(
            self.extra_times
                .iter()
                .copied()
                .filter(|t| *t >= self.t_start && *t <= self.t_end),
        );
        times.sort_by(|a, b| a.total_cmp(b));
        times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        times
    }
}

/// Run metadata carried alongside the snapshots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub config_hash: String,
    pub potential: Potential,
    pub mode: RhsMode,
    pub n_points: usize,
    pub length: f64,
    pub scheme: Scheme,
    pub dt: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub meta: TrajectoryMeta,
    snapshots: Vec<OrbitalEnsemble>,
    pub steps: usize,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn new(meta: TrajectoryMeta, snapshots: Vec<OrbitalEnsemble>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::arg("trajectory needs at least one snapshot"));
        }
        let grid = snapshots[0].grid().clone();
        for pair in snapshots.windows(2) {
            if pair[1].time() <= pair[0].time() {
                return Err(Error::arg("snapshot times must increase strictly"));
            }
            if *pair[1].grid() != grid {
                return Err(Error::GridMismatch);
            }
        }
        Ok(Trajectory {
            meta,
            snapshots,
            steps: 0,
            warnings: Vec::new(),
        })
    }

    pub fn snapshots(&self) -> &[OrbitalEnsemble] {
        &self.snapshots
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time()).collect()
    }

    pub fn grid(&self) -> &Grid {
        self.snapshots[0].grid()
    }

    pub fn first(&self) -> &OrbitalEnsemble {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &OrbitalEnsemble {
        self.snapshots.last().expect("non-empty")
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Snapshot whose stamp equals `t` up to a relative `1e-9`.
    pub fn at_time(&self, t: f64) -> Option<&OrbitalEnsemble> {
        self.snapshots
            .iter()
            .find(|s| (s.time() - t).abs() <= 1e-9 * t.abs().max(1.0))
    }

    pub fn with_config_hash(mut self, hash: impl Into<String>) -> Self {
        self.meta.config_hash = hash.into();
        self
    }
}

/// Fraction of `trace_mass` sitting in the two outer bands of relative
/// width `band`.
pub fn boundary_mass_fraction(ens: &OrbitalEnsemble, band: f64) -> f64 {
    let total = ens.trace_mass();
    if total == 0.0 {
        return 0.0;
    }
    let grid = ens.grid();
    let edge = grid.length() * (0.5 - band);
    let mut outer = 0.0;
    for (a, u) in ens.weights().iter().zip(ens.orbitals()) {
        let s: f64 = u
            .values()
            .iter()
            .enumerate()
            .filter(|(j, _)| grid.node(*j).abs() >= edge)
            .map(|(_, v)| v.norm_sqr())
            .sum();
        outer += a * s * grid.dx();
    }
    outer / total
}

/// Free-flow multipliers for one step size.
struct Phases {
    dt: f64,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
}

impl Phases {
    fn new(grid: &Grid, dt: f64) -> Self {
        Phases {
            dt,
            half: grid.free_phases(0.5 * dt),
            full: grid.free_phases(dt),
        }
    }
}

type State = Vec<Vec<Complex64>>;

/// Advances raw spectral states by one step of a fixed scheme.
pub struct Stepper {
    op: NonlinearOperator,
    scheme: Scheme,
    weights: Vec<f64>,
}

impl Stepper {
    pub fn new(op: NonlinearOperator, scheme: Scheme, weights: Vec<f64>) -> Self {
        Stepper { op, scheme, weights }
    }

    fn grid(&self) -> &Grid {
        self.op.grid()
    }

    fn to_physical(&self, state: &State) -> State {
        let grid = self.grid();
        let inv_n = 1.0 / grid.n_points() as f64;
        state
            .par_iter()
            .map(|v| {
                let mut buf = v.clone();
                grid.ifft_raw(&mut buf);
                buf.iter_mut().for_each(|c| *c *= inv_n);
                buf
            })
            .collect()
    }

    fn to_spectral(&self, fields: &[ComplexField]) -> State {
        let grid = self.grid();
        fields
            .par_iter()
            .map(|f| {
                let mut buf = f.values().to_vec();
                grid.fft_raw(&mut buf);
                buf
            })
            .collect()
    }

    /// `−i F[N(u)]` for a raw spectral state.
    fn force(&self, state: &State) -> State {
        let n = self.grid().n_points();
        if self.op.mode() == RhsMode::Linear {
            return vec![vec![Complex64::new(0.0, 0.0); n]; state.len()];
        }
        let phys = self.to_physical(state);
        let slices: Vec<&[Complex64]> = phys.iter().map(|v| v.as_slice()).collect();
        let mut out = self.op.apply_spectral(&self.weights, &slices);
        let minus_i = Complex64::new(0.0, -1.0);
        out.iter_mut().for_each(|v| v.iter_mut().for_each(|c| *c *= minus_i));
        out
    }

    fn advance(&self, state: &mut State, phases: &Phases) -> Result<()> {
        match self.scheme {
            Scheme::Ifrk4 => self.lawson_rk4(state, phases),
            Scheme::Strang2 => self.strang(state, phases)?,
        }
        Ok(())
    }

    fn lawson_rk4(&self, state: &mut State, ph: &Phases) {
        let dt = ph.dt;
        let e = &ph.half;
        let e2 = &ph.full;
        let k1 = self.force(state);
        let stage = |f: &dyn Fn(usize, usize) -> Complex64| -> State {
            (0..state.len())
                .map(|m| (0..state[m].len()).map(|i| f(m, i)).collect())
                .collect()
        };
        let v2 = stage(&|m, i| e[i] * (state[m][i] + k1[m][i] * (0.5 * dt)));
        let k2 = self.force(&v2);
        let v3 = stage(&|m, i| e[i] * state[m][i] + k2[m][i] * (0.5 * dt));
        let k3 = self.force(&v3);
        let v4 = stage(&|m, i| e2[i] * state[m][i] + e[i] * k3[m][i] * dt);
        let k4 = self.force(&v4);
        let c = dt / 6.0;
        for (m, v) in state.iter_mut().enumerate() {
            for (i, x) in v.iter_mut().enumerate() {
                *x = e2[i] * *x + (e2[i] * k1[m][i] + e[i] * (k2[m][i] + k3[m][i]) * 2.0 + k4[m][i]) * c;
            }
        }
    }

    fn strang(&self, state: &mut State, ph: &Phases) -> Result<()> {
        let apply = |s: &mut State, p: &[Complex64]| {
            s.iter_mut()
                .for_each(|v| v.iter_mut().zip(p).for_each(|(c, q)| *c *= q));
        };
        apply(state, &ph.half);
        if self.op.mode() != RhsMode::Linear {
            // implicit midpoint for i u' = N(u), solved by fixed-point iteration
            let u0 = state.clone();
            let mut u1 = u0.clone();
            let scale = u0
                .iter()
                .flat_map(|v| v.iter().map(|c| c.norm()))
                .fold(0.0, f64::max)
                .max(f64::MIN_POSITIVE);
            let mut converged = false;
            for _ in 0..200 {
                let mid: State = u0
                    .iter()
                    .zip(&u1)
                    .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x + y) * 0.5).collect())
                    .collect();
                let f = self.force(&mid);
                let mut change: f64 = 0.0;
                for ((next, a), fv) in u1.iter_mut().zip(&u0).zip(&f) {
                    for ((y, x), g) in next.iter_mut().zip(a).zip(fv) {
                        let candidate = x + g * ph.dt;
                        change = change.max((candidate - *y).norm());
                        *y = candidate;
                    }
                }
                if change <= 1e-15 * scale {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::NumericalAbort {
                    t: f64::NAN,
                    reason: "implicit midpoint iteration did not converge".into(),
                });
            }
            *state = u1;
        }
        apply(state, &ph.half);
        Ok(())
    }
}

fn state_is_finite(state: &State) -> bool {
    state
        .iter()
        .all(|v| v.iter().all(|c| c.re.is_finite() && c.im.is_finite()))
}

fn build_stepper(ens: &OrbitalEnsemble, w: &Potential, mode: RhsMode, scheme: Scheme, dealias: bool) -> Stepper {
    let op = NonlinearOperator::new(ens.grid(), w, mode).with_dealiasing(dealias);
    Stepper::new(op, scheme, ens.weights().to_vec())
}

fn snapshot_from_state(stepper: &Stepper, template: &OrbitalEnsemble, state: &State, t: f64) -> OrbitalEnsemble {
    let grid = stepper.grid();
    let orbitals = stepper
        .to_physical(state)
        .into_iter()
        .map(|v| ComplexField::from_vec_unchecked(grid, v))
        .collect();
    template.with_orbitals(orbitals, t)
}

/// Integrates from `ens.time()` to `t_target` with nominal step `dt`,
/// shrinking the last step to land exactly.
fn integrate_segment(stepper: &Stepper, state: &mut State, t0: f64, t_target: f64, regular: &Phases) -> Result<usize> {
    let dt = regular.dt;
    let span = t_target - t0;
    if span <= 0.0 {
        return Ok(0);
    }
    let full_steps = ((span / dt) * (1.0 + 1e-12)).floor() as usize;
    let mut taken = 0;
    for k in 0..full_steps {
        stepper
            .advance(state, regular)
            .map_err(|e| with_time(e, t0 + k as f64 * dt))?;
        taken += 1;
        if !state_is_finite(state) {
            return Err(Error::NumericalAbort {
                t: t0 + (k + 1) as f64 * dt,
                reason: "non-finite orbital values".into(),
            });
        }
    }
    let remainder = t_target - (t0 + full_steps as f64 * dt);
    if remainder > 1e-12 * t_target.abs().max(1.0) {
        let last = Phases::new(stepper.grid(), remainder);
        stepper
            .advance(state, &last)
            .map_err(|e| with_time(e, t_target - remainder))?;
        taken += 1;
        if !state_is_finite(state) {
            return Err(Error::NumericalAbort {
                t: t_target,
                reason: "non-finite orbital values".into(),
            });
        }
    }
    Ok(taken)
}

fn with_time(e: Error, t: f64) -> Error {
    match e {
        Error::NumericalAbort { reason, .. } => Error::NumericalAbort { t, reason },
        other => other,
    }
}

/// One step of size `dt` with the default scheme.
pub fn step(ens: &OrbitalEnsemble, w: &Potential, mode: RhsMode, dt: f64) -> Result<OrbitalEnsemble> {
    step_with(ens, w, mode, dt, Scheme::Ifrk4)
}

pub fn step_with(
    ens: &OrbitalEnsemble,
    w: &Potential,
    mode: RhsMode,
    dt: f64,
    scheme: Scheme,
) -> Result<OrbitalEnsemble> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::arg("dt must be positive"));
    }
    let stepper = build_stepper(ens, w, mode, scheme, false);
    let mut state = stepper.to_spectral(ens.orbitals());
    stepper
        .advance(&mut state, &Phases::new(ens.grid(), dt))
        .map_err(|e| with_time(e, ens.time()))?;
    if !state_is_finite(&state) {
        return Err(Error::NumericalAbort {
            t: ens.time() + dt,
            reason: "non-finite orbital values".into(),
        });
    }
    Ok(snapshot_from_state(&stepper, ens, &state, ens.time() + dt))
}

/// Evolves `initial` (stamped at `config.t_start`) and records every
/// snapshot time of the schedule.
pub fn evolve(
    config: &IntegratorConfig,
    initial: &OrbitalEnsemble,
    w: &Potential,
    mode: RhsMode,
) -> Result<Trajectory> {
    config.validate()?;
    w.validate()?;
    if (initial.time() - config.t_start).abs() > 1e-12 * config.t_start {
        return Err(Error::arg(format!(
            "initial data stamped at {} but t_start is {}",
            initial.time(),
            config.t_start
        )));
    }
    let stepper = build_stepper(initial, w, mode, config.scheme, config.dealias);
    let regular = Phases::new(initial.grid(), config.dt);
    let mut state = stepper.to_spectral(initial.orbitals());
    let mut snapshots = vec![initial.clone().with_time(config.t_start)];
    let mut warnings = Vec::new();
    let mut steps = 0;
    let mut t = config.t_start;
    let mut warned = false;
    let mut check_boundary = |snap: &OrbitalEnsemble, warnings: &mut Vec<String>| {
        let frac = boundary_mass_fraction(snap, config.boundary_band);
        if frac > WRAP_WARNING_THRESHOLD && !warned {
            warned = true;
            let msg = format!(
                "boundary mass fraction {frac:.3e} exceeds {WRAP_WARNING_THRESHOLD:e} at t = {}",
                snap.time()
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    };
    check_boundary(&snapshots[0], &mut warnings);
    for target in config.snapshot_times() {
        if target <= t {
            continue;
        }
        steps += integrate_segment(&stepper, &mut state, t, target, &regular)?;
        t = target;
        let snap = snapshot_from_state(&stepper, initial, &state, t);
        check_boundary(&snap, &mut warnings);
        snapshots.push(snap);
    }
    let meta = TrajectoryMeta {
        config_hash: String::new(),
        potential: w.clone(),
        mode,
        n_points: initial.grid().n_points(),
        length: initial.grid().length(),
        scheme: config.scheme,
        dt: config.dt,
    };
    let mut traj = Trajectory::new(meta, snapshots)?;
    traj.steps = steps;
    traj.warnings = warnings;
    Ok(traj)
}

/// Evolves `ens` forward by `duration` without recording intermediate
/// states.
pub fn evolve_to(
    ens: &OrbitalEnsemble,
    w: &Potential,
    mode: RhsMode,
    scheme: Scheme,
    dt: f64,
    duration: f64,
) -> Result<OrbitalEnsemble> {
    if !(dt.is_finite() && dt > 0.0) || !(duration.is_finite() && duration >= 0.0) {
        return Err(Error::arg("dt must be positive and duration nonnegative"));
    }
    let stepper = build_stepper(ens, w, mode, scheme, false);
    let mut state = stepper.to_spectral(ens.orbitals());
    integrate_segment(&stepper, &mut state, 0.0, duration, &Phases::new(ens.grid(), dt))?;
    Ok(snapshot_from_state(&stepper, ens, &state, ens.time() + duration))
}

/// Evolves forward by `duration`, conjugates, evolves forward again by the
/// same duration and compares with the conjugated start: returns the
/// largest orbital `L²` error relative to the largest orbital norm.
pub fn time_reversal_error(
    ens: &OrbitalEnsemble,
    w: &Potential,
    mode: RhsMode,
    scheme: Scheme,
    dt: f64,
    duration: f64,
) -> Result<f64> {
    let forward = evolve_to(ens, w, mode, scheme, dt, duration)?;
    let back = evolve_to(&forward.conjugate(), w, mode, scheme, dt, duration)?;
    let target = ens.conjugate();
    let scale = ens.orbitals().iter().map(|u| u.l2_norm()).fold(0.0, f64::max);
    let err = back
        .orbitals()
        .iter()
        .zip(target.orbitals())
        .map(|(a, b)| a.sub(b).map(|d| d.l2_norm()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(if scale > 0.0 { err / scale } else { err })
}

fn max_orbital_difference(a: &OrbitalEnsemble, b: &OrbitalEnsemble) -> Result<f64> {
    a.orbitals()
        .iter()
        .zip(b.orbitals())
        .map(|(x, y)| x.sub(y).map(|d| d.sup_norm()))
        .try_fold(0.0, |m, e| e.map(|e| f64::max(m, e)))
}

/// Observed order `log₂(‖u_dt − u_{dt/2}‖ / ‖u_{dt/2} − u_{dt/4}‖)` after
/// evolving for `duration`.
pub fn self_convergence_order(
    ens: &OrbitalEnsemble,
    w: &Potential,
    mode: RhsMode,
    scheme: Scheme,
    dt: f64,
    duration: f64,
) -> Result<f64> {
    let run = |h: f64| evolve_to(ens, w, mode, scheme, h, duration);
    let (a, b, c) = (run(dt)?, run(dt / 2.0)?, run(dt / 4.0)?);
    let coarse = max_orbital_difference(&a, &b)?;
    let fine = max_orbital_difference(&b, &c)?;
    if !(coarse > 0.0 && fine > 0.0) {
        return Err(Error::InsufficientData("no time-step error to measure".into()));
    }
    Ok((coarse / fine).log2())
}

/// Residual of the Duhamel formula between consecutive snapshots.
///
/// For each pair `(s, t)` computes the aggregated
/// `√(Σ α_m ‖u_m(t) − e^{i(t−s)Δ}u_m(s) + i∫ₛᵗ e^{i(t−τ)Δ}N(u(τ))_m dτ‖²)`
/// where the integrand is re-simulated from `u(s)` on `n_quad` equal
/// intervals (each split into substeps no longer than the trajectory's
/// `dt`) and integrated by composite Simpson.
pub fn duhamel_residual(traj: &Trajectory, w: &Potential, mode: RhsMode, n_quad: usize) -> Result<Vec<f64>> {
    if n_quad < 2 || !n_quad.is_multiple_of(2) {
        return Err(Error::arg("n_quad must be an even integer ≥ 2"));
    }
    let snaps = traj.snapshots();
    let dt = traj.meta.dt;
    let scheme = traj.meta.scheme;
    let mut out = Vec::with_capacity(snaps.len().saturating_sub(1));
    for pair in snaps.windows(2) {
        let (us, ut) = (&pair[0], &pair[1]);
        let (s, t) = (us.time(), ut.time());
        let h = (t - s) / n_quad as f64;
        let sub = (h / dt).ceil().max(1.0);
        let sub_dt = h / sub;
        let op = NonlinearOperator::new(us.grid(), w, mode);
        let weights = us.weights().to_vec();
        // accumulate the Simpson sum of e^{i(t−τ)Δ} N(u(τ)) per orbital
        let grid = us.grid();
        let n_pts = grid.n_points();
        let mut acc = vec![vec![Complex64::new(0.0, 0.0); n_pts]; us.rank()];
        let mut node = us.clone();
        for j in 0..=n_quad {
            if j > 0 {
                node = evolve_to(&node, w, mode, scheme, sub_dt, h)?;
            }
            let tau = s + j as f64 * h;
            let c = if j == 0 || j == n_quad {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let slices: Vec<&[Complex64]> = node.orbitals().iter().map(|u| u.values()).collect();
            let n_vals = op.apply(&weights, &slices);
            for (a, v) in acc.iter_mut().zip(n_vals) {
                let f = free_propagate(&ComplexField::from_vec_unchecked(grid, v), t - tau);
                for (x, y) in a.iter_mut().zip(f.values()) {
                    *x += y * c;
                }
            }
        }
        let factor = Complex64::new(0.0, h / 3.0);
        let mut total = 0.0;
        for (m, a) in acc.iter().enumerate() {
            let lin = free_propagate(&us.orbitals()[m], t - s);
            let r: f64 = ut.orbitals()[m]
                .values()
                .iter()
                .zip(lin.values())
                .zip(a)
                .map(|((x, l), q)| (x - l + q * factor).norm_sqr())
                .sum::<f64>()
                * grid.dx();
            total += weights[m] * r;
        }
        out.push(total.sqrt());
    }
    Ok(out)
}
