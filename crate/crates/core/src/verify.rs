//! Built-in invariant suites behind `hfscat verify`.

use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::commands::{remainder_cross_check, simulate};
use crate::config::preset;
use crate::diagnostics::{f_identity_check, profile, remainder_exact, remainder_quadrature, remainder_scale};
use crate::ensemble::OrbitalEnsemble;
use crate::grid::{ComplexField, Grid};
use crate::integrator::{
    duhamel_residual, evolve, prepare_initial, self_convergence_order, time_reversal_error, InitialData,
    IntegratorConfig, Scheme, WavePacket,
};
use crate::nonlinearity::{
    direct_term, exchange_dense_oracle_for, exchange_term, mass_production, NonlinearOperator, RhsMode,
};
use crate::potential::{Atom, Potential};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Fast,
    Full,
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Level::Fast),
            "full" => Ok(Level::Full),
            other => Err(Error::arg(format!("unknown verify level `{other}`"))),
        }
    }
}

/// Outcome of one check: `passed` iff `value ≤ tolerance` (or, for
/// lower-bounded checks, the range stated in `detail` holds).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn at_most(check: &str, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        CheckResult {
            check: check.into(),
            passed: value <= tolerance,
            value,
            tolerance,
            detail: detail.into(),
        }
    }

    fn failed(check: &str, e: &Error) -> Self {
        CheckResult {
            check: check.into(),
            passed: false,
            value: f64::NAN,
            tolerance: f64::NAN,
            detail: e.to_string(),
        }
    }
}

/// Deliberate faults for exercising the suite itself.
#[doc(hidden)]
#[derive(Clone, Copy, Debug)]
pub struct Faults {
    pub exchange_sign: f64,
}

impl Default for Faults {
    fn default() -> Self {
        Faults { exchange_sign: 1.0 }
    }
}

pub fn potential_variants() -> Vec<Potential> {
    vec![
        Potential::dirac(0.9),
        Potential::gaussian(1.0, 1.0).expect("valid"),
        Potential::box_mass(-0.7, 1.5).expect("valid"),
        Potential::dirac_sum(vec![
            Atom { mass: 0.5, shift: 0.75 },
            Atom {
                mass: 0.5,
                shift: -0.75,
            },
        ])
        .expect("valid"),
    ]
}

/// `K` modulated Hermite packets with distinct centers and frequencies.
pub fn packet_ensemble(grid: &Grid, k: usize, amplitude: f64) -> Result<OrbitalEnsemble> {
    let packets = (0..k)
        .map(|i| {
            let f = i as f64;
            WavePacket::gaussian(1.0 / (1.0 + f), amplitude, 0.7 * f - 1.0, 0.5 * f - 0.6, 1.0 + 0.2 * f)
                .with_hermite(i as u32 % 3)
        })
        .collect();
    prepare_initial(&InitialData { packets }, grid, 0.0)
}

fn max_sup(fields: &[ComplexField]) -> f64 {
    fields.iter().map(|f| f.sup_norm()).fold(0.0, f64::max)
}

fn plane_wave_cancellation(faults: &Faults) -> Result<CheckResult> {
    let g = Grid::new(64, 12.0)?;
    let amps = [
        Complex64::new(0.3, 0.1),
        Complex64::new(-0.2, 0.25),
        Complex64::new(0.15, 0.0),
    ];
    let weights = vec![1.0, 0.5, 2.0];
    let orbitals = amps
        .iter()
        .map(|a| ComplexField::plane_wave(&g, 3, *a))
        .collect::<Result<Vec<_>>>()?;
    let ens = OrbitalEnsemble::new(weights.clone(), orbitals, 0.0)?;
    let amax = amps.iter().map(|a| a.norm()).fold(0.0, f64::max);
    let density: f64 = weights.iter().zip(&amps).map(|(a, c)| a * c.norm_sqr()).sum();
    let mut worst: f64 = 0.0;
    for w in potential_variants() {
        let op = NonlinearOperator::new(&g, &w, RhsMode::HartreeFock).with_exchange_sign(faults.exchange_sign);
        let slices: Vec<&[Complex64]> = ens.orbitals().iter().map(|u| u.values()).collect();
        let out = op.apply(&weights, &slices);
        let sup = out.iter().flat_map(|v| v.iter().map(|c| c.norm())).fold(0.0, f64::max);
        let scale = w.m1_norm().max(1.0) * density * amax;
        worst = worst.max(sup / scale);
    }
    Ok(CheckResult::at_most(
        "plane_wave_cancellation",
        worst,
        1e-12,
        "sup|N_HF| / (|w|·Σα|a|²·max|a|) over four potentials",
    ))
}

fn rank_one_exchange() -> Result<CheckResult> {
    let g = Grid::new(128, 24.0)?;
    let ens = packet_ensemble(&g, 1, 0.8)?;
    let mut worst: f64 = 0.0;
    for w in potential_variants() {
        let d = direct_term(&ens, &w);
        let e = exchange_term(&ens, &w);
        let err = d[0].sub(&e[0])?.sup_norm();
        worst = worst.max(err / max_sup(&d).max(f64::MIN_POSITIVE));
    }
    Ok(CheckResult::at_most(
        "rank_one_exchange",
        worst,
        1e-14,
        "relative sup difference of direct and exchange",
    ))
}

/// Fast exchange against the dense quadrature oracle.
pub fn exchange_oracle_error(n: usize, k: usize) -> Result<f64> {
    let g = Grid::new(n, 16.0 * (n as f64 / 64.0).sqrt())?;
    let ens = packet_ensemble(&g, k, 0.6)?;
    let w = Potential::gaussian(1.0, 1.0)?;
    let fast = exchange_term(&ens, &w);
    let dense = exchange_dense_oracle_for(&ens, &w)?;
    let mut worst: f64 = 0.0;
    for (a, b) in fast.iter().zip(&dense) {
        worst = worst.max(a.sub(b)?.sup_norm());
    }
    Ok(worst / max_sup(&dense))
}

fn self_adjointness() -> Result<CheckResult> {
    let g = Grid::new(128, 20.0)?;
    let ens = packet_ensemble(&g, 3, 0.7)?;
    let mut worst: f64 = 0.0;
    for w in potential_variants() {
        let direct = direct_term(&ens, &w);
        let scale: f64 = ens
            .weights()
            .iter()
            .zip(ens.orbitals())
            .zip(&direct)
            .map(|((a, u), f)| a * u.l2_norm() * f.l2_norm())
            .sum();
        for mode in [RhsMode::HartreeFock, RhsMode::ReducedHartree] {
            let n = crate::nonlinearity::rhs(&ens, &w, mode);
            worst = worst.max(mass_production(&ens, &n).abs() / scale);
        }
    }
    Ok(CheckResult::at_most(
        "self_adjointness",
        worst,
        1e-12,
        "|Im Σα⟨u,N(u)⟩| relative to the direct term",
    ))
}

fn evolved_state(s: f64) -> Result<(OrbitalEnsemble, Potential)> {
    let g = Grid::new(1024, 128.0)?;
    let ens = packet_ensemble(&g, 2, 0.5)?;
    let w = Potential::gaussian(1.0, 1.0)?;
    Ok((ens.free_propagate(s).with_time(s), w))
}

fn f_identity(seed: u64) -> Result<Vec<CheckResult>> {
    let (u, w) = evolved_state(2.0)?;
    let r = f_identity_check(&profile(&u), &w, 400, seed);
    Ok(vec![
        CheckResult::at_most(
            "f_identity_zero",
            r.f000_max / r.f_scale,
            1e-14,
            "max|F(s,0,0,ξ)| / scale³",
        ),
        CheckResult::at_most(
            "f_identity_antisymmetry",
            r.antisymmetry_max / r.bracket_scale,
            1e-14,
            "max|B(η,σ)+B(σ,η)| / scale³",
        ),
    ])
}

fn remainder_algebra() -> Result<CheckResult> {
    let (u, w) = evolved_state(2.0)?;
    let p = profile(&u);
    let coarse = Grid::new(64, 16.0)?;
    let quad = remainder_quadrature(&p, &w, &coarse)?;
    let exact = remainder_exact(&u, &w, RhsMode::HartreeFock);
    let fine = p.grid();
    let scale = remainder_scale(&p, &w);
    let mut worst: f64 = 0.0;
    for (k, &xi) in coarse.frequencies().iter().enumerate() {
        let slot = fine.nearest_mode(xi);
        for (q, e) in quad.iter().zip(&exact) {
            worst = worst.max((q[k] - e[slot]).norm());
        }
    }
    Ok(CheckResult::at_most(
        "remainder_quadrature",
        worst / scale,
        1e-6,
        "coarse quadrature vs −i e^{isξ²}N̂",
    ))
}

fn order_check() -> Result<CheckResult> {
    let g = Grid::new(128, 40.0)?;
    let data = InitialData {
        packets: vec![
            WavePacket::gaussian(1.0, 2.0, 0.0, 0.0, 1.5),
            WavePacket::gaussian(0.5, 2.0, 0.0, 0.0, 1.5).with_hermite(1),
        ],
    };
    let ens = prepare_initial(&data, &g, 1.0)?;
    let w = Potential::gaussian(4.0, 1.0)?;
    let p = self_convergence_order(&ens, &w, RhsMode::HartreeFock, Scheme::Ifrk4, 0.04, 1.0)?;
    Ok(CheckResult {
        check: "integrator_order".into(),
        passed: (p - 4.0).abs() <= 0.3,
        value: p,
        tolerance: 0.3,
        detail: "IFRK4 self-convergence order, expected 4 ± 0.3".into(),
    })
}

/// Worst Duhamel residual at `n_quad` and `2·n_quad` Simpson intervals.
pub fn duhamel_refinement(n_quad: usize) -> Result<(f64, f64)> {
    let g = Grid::new(256, 48.0)?;
    let ens = packet_ensemble(&g, 2, 1.2)?.free_propagate(1.0).with_time(1.0);
    let w = Potential::gaussian(2.0, 1.0)?;
    let cfg = IntegratorConfig {
        dt: 0.005,
        t_start: 1.0,
        t_end: 3.0,
        snapshot_ratio: 3.0,
        ..IntegratorConfig::default()
    };
    let traj = evolve(&cfg, &ens, &w, RhsMode::HartreeFock)?;
    let worst = |n| -> Result<f64> {
        Ok(duhamel_residual(&traj, &w, RhsMode::HartreeFock, n)?
            .into_iter()
            .fold(0.0, f64::max))
    };
    Ok((worst(n_quad)?, worst(2 * n_quad)?))
}

fn duhamel_check() -> Result<CheckResult> {
    let (coarse, fine) = duhamel_refinement(16)?;
    let gain = coarse / fine;
    Ok(CheckResult {
        check: "duhamel_refinement".into(),
        passed: gain >= 8.0,
        value: gain,
        tolerance: 8.0,
        detail: format!("residual {coarse:.3e} at 16 intervals, {fine:.3e} at 32; gain must be ≥ 8"),
    })
}

fn cross_check() -> Result<CheckResult> {
    let mut cfg = preset("preset-hf-default")?;
    cfg.name = "verify-cross-check".into();
    cfg.grid.n = 2048;
    cfg.grid.length = 256.0;
    cfg.integrator.t_end = 8.0;
    cfg.fit.window = (2.0, 8.0);
    cfg.fit.operator_window = (2.0, 8.0);
    cfg.fit.remainder_window = (2.0, 4.0);
    cfg.checks.f_samples = 100;
    let traj = simulate(&cfg)?;
    let c = remainder_cross_check(&cfg, &traj, cfg.checks.cross_check_time)?;
    Ok(CheckResult {
        check: "remainder_cross_check".into(),
        passed: c.passed,
        value: c.worst_excess,
        tolerance: 0.0,
        detail: format!(
            "max_ξ ‖R_q − R_fd‖ − 0.1‖R_fd‖ − 1e-6·scale at s = {} (|ΔR| {:.3e}, |R_fd| {:.3e})",
            c.s, c.max_difference, c.fd_sup
        ),
    })
}

fn reversal_check() -> Result<CheckResult> {
    let g = Grid::new(256, 64.0)?;
    let ens = packet_ensemble(&g, 2, 1.0)?;
    let w = Potential::gaussian(2.0, 1.0)?;
    let e = time_reversal_error(&ens, &w, RhsMode::HartreeFock, Scheme::Ifrk4, 0.02, 3.0)?;
    Ok(CheckResult::at_most(
        "time_reversal",
        e,
        1e-6,
        "relative L² error after forward and conjugate-backward runs",
    ))
}

fn conservation_check() -> Result<Vec<CheckResult>> {
    let g = Grid::new(512, 96.0)?;
    let ens = packet_ensemble(&g, 3, 0.8)?.free_propagate(1.0).with_time(1.0);
    let w = Potential::gaussian(1.0, 1.0)?;
    let cfg = IntegratorConfig {
        t_end: 8.0,
        ..IntegratorConfig::default()
    };
    let traj = evolve(&cfg, &ens, &w, RhsMode::HartreeFock)?;
    let m0 = ens.trace_mass();
    let mass = traj
        .snapshots()
        .iter()
        .map(|s| (s.trace_mass() - m0).abs() / m0)
        .fold(0.0, f64::max);
    let gram = traj.snapshots().iter().map(|s| s.gram_drift(&ens)).fold(0.0, f64::max);
    Ok(vec![
        CheckResult::at_most("mass_conservation", mass, 1e-8, "relative trace-mass drift"),
        CheckResult::at_most("gram_conservation", gram, 1e-7, "Gram-matrix drift"),
    ])
}

fn collect(name: &str, r: Result<CheckResult>, out: &mut Vec<CheckResult>) {
    out.push(r.unwrap_or_else(|e| CheckResult::failed(name, &e)));
}

fn collect_many(name: &str, r: Result<Vec<CheckResult>>, out: &mut Vec<CheckResult>) {
    match r {
        Ok(v) => out.extend(v),
        Err(e) => out.push(CheckResult::failed(name, &e)),
    }
}

/// Runs the suite for `level`, with `faults` injected.
#[doc(hidden)]
pub fn run_checks_with(level: Level, faults: &Faults) -> Vec<CheckResult> {
    let mut out = Vec::new();
    collect("plane_wave_cancellation", plane_wave_cancellation(faults), &mut out);
    collect("rank_one_exchange", rank_one_exchange(), &mut out);
    collect(
        "exchange_oracle",
        exchange_oracle_error(64, 3)
            .map(|e| CheckResult::at_most("exchange_oracle", e, 1e-10, "N = 64, K = 3, Gaussian")),
        &mut out,
    );
    collect("self_adjointness", self_adjointness(), &mut out);
    collect_many("f_identity", f_identity(7), &mut out);
    collect("remainder_quadrature", remainder_algebra(), &mut out);
    if level == Level::Full {
        collect("integrator_order", order_check(), &mut out);
        collect("duhamel_refinement", duhamel_check(), &mut out);
        collect("remainder_cross_check", cross_check(), &mut out);
        collect("time_reversal", reversal_check(), &mut out);
        collect_many("conservation", conservation_check(), &mut out);
    }
    out
}

pub fn run_checks(level: Level) -> Vec<CheckResult> {
    run_checks_with(level, &Faults::default())
}

/// Writes one JSON line per check; returns whether all passed.
pub fn report_checks(results: &[CheckResult], out: &mut impl Write) -> Result<bool> {
    for r in results {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(results.iter().all(|r| r.passed))
}
