//! Acceptance criteria, one test each. Every test prints a single
//! `ACCEPTANCE <n> PASS|FAIL` line to stdout (bypassing output capture) and
//! then asserts.

use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;

use hfscat::commands::{analyze, cmd_compare, cmd_run, simulate, write_run, RunReport};
use hfscat::config::{preset, RunConfig, PRESET_NAMES};
use hfscat::diagnostics::{decay_fit, dispersive_estimate_check, records};
use hfscat::integrator::{prepare_initial, self_convergence_order, InitialData, WavePacket};
use hfscat::nonlinearity::rhs;
use hfscat::verify::{duhamel_refinement, exchange_oracle_error, potential_variants};
use hfscat::{ComplexField, Grid, Potential, RhsMode, Scheme, Trajectory};
use num_complex::Complex64;

fn verdict(n: u32, title: &str, passed: bool, detail: String) {
    let line = format!(
        "ACCEPTANCE {n:>2} {} {title}: {detail}\n",
        if passed { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(passed, "{}", line.trim_end());
}

struct DefaultRun {
    cfg: RunConfig,
    traj: Trajectory,
    report: RunReport,
}

fn default_run() -> &'static DefaultRun {
    static RUN: OnceLock<DefaultRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = preset("preset-hf-default").unwrap();
        let traj = simulate(&cfg).unwrap();
        let report = analyze(&cfg, &traj).unwrap();
        DefaultRun { cfg, traj, report }
    })
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

#[test]
fn criterion_01_plane_wave_cancellation() {
    let cfg = preset("preset-planewave").unwrap();
    let grid = cfg.make_grid().unwrap();
    let ens = prepare_initial(&cfg.initial, &grid, cfg.integrator.t_start).unwrap();
    let amax = ens.orbitals().iter().map(|u| u.sup_norm()).fold(0.0, f64::max);
    let density: f64 = ens
        .weights()
        .iter()
        .zip(ens.orbitals())
        .map(|(a, u)| a * u.sup_norm().powi(2))
        .sum();
    let mut worst: f64 = 0.0;
    for w in potential_variants().into_iter().chain([cfg.potential.clone()]) {
        let n = rhs(&ens, &w, RhsMode::HartreeFock);
        let sup = n.iter().map(|f| f.sup_norm()).fold(0.0, f64::max);
        worst = worst.max(sup / (w.m1_norm().max(1.0) * density * amax));
    }
    verdict(
        1,
        "plane-wave cancellation",
        worst <= 1e-12,
        format!(
            "max sup|N_HF| / amplitude³-scale = {worst:.2e} (≤ 1e-12) over {} potentials",
            potential_variants().len() + 1
        ),
    );
}

#[test]
fn criterion_02_rank_one_freeness() {
    let cfg = preset("preset-rank1").unwrap();
    let hf = simulate(&cfg).unwrap();
    let lin = simulate(&RunConfig {
        mode: RhsMode::Linear,
        ..cfg.clone()
    })
    .unwrap();
    let mut worst: f64 = 0.0;
    for (a, b) in hf.snapshots().iter().zip(lin.snapshots()) {
        assert_eq!(a.time(), b.time());
        worst = worst.max(a.orbitals()[0].sub(&b.orbitals()[0]).unwrap().sup_norm());
    }
    verdict(
        2,
        "rank-one freeness",
        worst <= 1e-8 && hf.last().time() >= 64.0,
        format!(
            "sup |u_HF − u_lin| = {worst:.2e} (≤ 1e-8) over t ∈ [1, {}]",
            hf.last().time()
        ),
    );
}

#[test]
fn criterion_03_mass_conservation() {
    let r = &default_run().report;
    verdict(
        3,
        "mass conservation",
        r.mass_drift <= 1e-8 && r.gram_drift <= 1e-7,
        format!(
            "trace-mass drift {:.2e} (≤ 1e-8), Gram drift {:.2e} (≤ 1e-7)",
            r.mass_drift, r.gram_drift
        ),
    );
}

#[test]
fn criterion_04_exchange_oracle() {
    let err = exchange_oracle_error(256, 4).unwrap();
    verdict(
        4,
        "exchange oracle equivalence",
        err <= 1e-10,
        format!("N = 256, K = 4, Gaussian: rel err {err:.2e} (≤ 1e-10)"),
    );
}

#[test]
fn criterion_05_integrator_order() {
    let g = Grid::new(128, 40.0).unwrap();
    let data = InitialData {
        packets: vec![
            WavePacket::gaussian(1.0, 2.0, 0.0, 0.0, 1.5),
            WavePacket::gaussian(0.5, 2.0, 0.0, 0.0, 1.5).with_hermite(1),
        ],
    };
    let ens = prepare_initial(&data, &g, 1.0).unwrap();
    let w = Potential::gaussian(4.0, 1.0).unwrap();
    let order = self_convergence_order(&ens, &w, RhsMode::HartreeFock, Scheme::Ifrk4, 0.04, 1.0).unwrap();
    let (coarse, fine) = duhamel_refinement(16).unwrap();
    let gain = coarse / fine;
    verdict(
        5,
        "integrator order",
        (order - 4.0).abs() <= 0.3 && gain >= 8.0,
        format!("IFRK4 slope {order:.3} (4 ± 0.3); Duhamel residual {coarse:.2e} → {fine:.2e}, gain {gain:.1} (≥ 8)"),
    );
}

#[test]
fn criterion_06_linear_dispersive_decay() {
    let cfg = RunConfig {
        mode: RhsMode::Linear,
        ..preset("preset-hf-default").unwrap()
    };
    let traj = simulate(&cfg).unwrap();
    let schedule = cfg.schedule();
    let series: Vec<(f64, f64)> = records(&traj, cfg.integrator.boundary_band)
        .iter()
        .filter(|r| schedule.iter().any(|t| (t - r.t).abs() <= 1e-9 * t))
        .map(|r| (r.t, r.sup_norm))
        .collect();
    let fit = decay_fit(&series, (4.0, 64.0)).unwrap();
    let g = Grid::new(8192, 2048.0).unwrap();
    let times: Vec<f64> = (0..=12).map(|j| 2f64.powf(j as f64 / 2.0)).collect();
    let mut constant: f64 = 0.0;
    for a in [0.5, 1.0, 2.0] {
        let f = ComplexField::from_fn(&g, |x| Complex64::new((-a * x * x).exp(), 0.0));
        constant = constant.max(dispersive_estimate_check(&f, &times, 0.125, 1.0).unwrap().constant);
    }
    verdict(
        6,
        "linear dispersive decay",
        (fit.exponent + 0.5).abs() <= 0.05 && constant <= 2.0,
        format!(
            "sup-norm exponent {:.4} (−0.5 ± 0.05); dispersive constant {constant:.3} (≤ 2)",
            fit.exponent
        ),
    );
}

#[test]
fn criterion_07_nonlinear_decay() {
    let run = default_run();
    let schedule = run.cfg.schedule();
    let series: Vec<(f64, f64)> = records(&run.traj, run.cfg.integrator.boundary_band)
        .iter()
        .filter(|r| schedule.iter().any(|t| (t - r.t).abs() <= 1e-9 * t))
        .map(|r| (r.t, r.sup_norm))
        .collect();
    let fit = decay_fit(&series, (4.0, 64.0)).unwrap();
    verdict(
        7,
        "nonlinear decay",
        (-0.65..=-0.35).contains(&fit.exponent),
        format!(
            "sup-norm exponent on [4, 64] = {:.4} ∈ [−0.65, −0.35], {} points",
            fit.exponent, fit.n_points
        ),
    );
}

#[test]
fn criterion_08_scattering() {
    let r = &default_run().report;
    let pick = |t: f64| r.cauchy.iter().find(|c| (c.t1 - t).abs() <= 1e-9 * t);
    let rows: Vec<_> = [4.0, 8.0, 16.0, 32.0].iter().filter_map(|&t| pick(t)).collect();
    let complete = rows.len() == 4;
    let d_inf: Vec<f64> = rows.iter().map(|c| c.d_inf).collect();
    let d_t0: Vec<f64> = rows.iter().map(|c| c.d_theta0).collect();
    let d_0t: Vec<f64> = rows.iter().map(|c| c.d_0theta).collect();
    let exponent = r.cauchy_exponent.unwrap_or(f64::NAN);
    let passed = complete
        && strictly_decreasing(&d_inf)
        && strictly_decreasing(&d_t0)
        && strictly_decreasing(&d_0t)
        && exponent < -0.05;
    verdict(
        8,
        "scattering",
        passed,
        format!(
            "d_inf(t,2t) at t=4,8,16,32: {}; exponent {exponent:.3} (< −0.05); θ-distances decreasing: {}",
            d_inf.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>().join(" > "),
            strictly_decreasing(&d_t0) && strictly_decreasing(&d_0t)
        ),
    );
}

#[test]
fn criterion_09_operator_scattering() {
    let r = &default_run().report;
    let window: Vec<f64> = r
        .s1_distances
        .iter()
        .filter(|(t, _)| (8.0 * (1.0 - 1e-9)..=64.0 * (1.0 + 1e-9)).contains(t))
        .map(|(_, d)| *d)
        .collect();
    let exponent = r.s1_exponent.unwrap_or(f64::NAN);
    verdict(
        9,
        "operator scattering",
        window.len() >= 5 && strictly_decreasing(&window) && exponent < 0.0,
        format!(
            "S¹ distance on [8, 64]: {} points, decreasing: {}, exponent {exponent:.3} (< 0)",
            window.len(),
            strictly_decreasing(&window)
        ),
    );
}

#[test]
fn criterion_10_thesis_contrast() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset("preset-contrast").unwrap();
    let report = cmd_compare(&cfg, dir.path()).unwrap();
    let hf = report.hartree_fock.phase_drift.clone().unwrap();
    let rh = report.reduced_hartree.phase_drift.clone().unwrap();
    let significant = rh.slope.abs() >= 5.0 * rh.stderr;
    let small = hf.slope.abs() <= 0.1 * rh.slope.abs();
    verdict(
        10,
        "thesis contrast",
        significant && small,
        format!(
            "RH slope {:.3e} ± {:.1e} ({:.0}σ, ≥ 5σ); HF slope {:.3e}; |HF|/|RH| = {:.2e} (≤ 0.1)",
            rh.slope,
            rh.stderr,
            rh.slope.abs() / rh.stderr,
            hf.slope,
            hf.slope.abs() / rh.slope.abs()
        ),
    );
}

#[test]
fn criterion_11_stationary_phase_algebra() {
    let r = &default_run().report;
    let f = r.f_identity.clone().expect("identity evaluated");
    let f_ok = f.f000_max <= 1e-14 * f.f_scale;
    let cross = r.remainder_cross_check.clone().expect("cross-check evaluated");
    let exponent = r.remainder_exponent.unwrap_or(f64::NAN);
    verdict(
        11,
        "stationary-phase algebra",
        f_ok && cross.passed && exponent <= -1.0,
        format!(
            "F(s,0,0,ξ)/scale³ = {:.1e} (≤ 1e-14); R_q vs R_fd excess {:.2e} (≤ 0); remainder exponent {exponent:.3} (≤ −1)",
            f.f000_max / f.f_scale,
            cross.worst_excess
        ),
    );
}

fn same_bytes(a: &Path, b: &Path) -> Vec<String> {
    let mut differing = Vec::new();
    for name in [
        "checkpoint.bin",
        "diagnostics.ndjson",
        "diagnostics.csv",
        "report.json",
        "config.toml",
    ] {
        if std::fs::read(a.join(name)).unwrap() != std::fs::read(b.join(name)).unwrap() {
            differing.push(name.to_string());
        }
    }
    differing
}

#[test]
fn criterion_12_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let mut differing = Vec::new();
    for name in PRESET_NAMES {
        let cfg = preset(name).unwrap();
        let (a, b) = (
            dir.path().join(format!("{name}-a")),
            dir.path().join(format!("{name}-b")),
        );
        if name == "preset-hf-default" {
            let run = default_run();
            write_run(&run.cfg, &run.traj, &run.report, &a).unwrap();
        } else {
            cmd_run(&cfg, &a).unwrap();
        }
        cmd_run(&cfg, &b).unwrap();
        differing.extend(same_bytes(&a, &b).into_iter().map(|f| format!("{name}/{f}")));
    }
    verdict(
        12,
        "determinism",
        differing.is_empty(),
        if differing.is_empty() {
            format!("byte-identical artifacts for {} presets", PRESET_NAMES.len())
        } else {
            format!("differing files: {}", differing.join(", "))
        },
    );
}
