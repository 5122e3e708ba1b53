//! The `run`, `compare` and `fit` subcommands as library functions.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::diagnostics::{
    decay_fit, f_identity_check, operator_scattering, phase_drift, profile, records, remainder_fd_orbitals,
    remainder_quadrature, remainder_scale, scattering_cauchy, sup_aggregate, CauchyDistances, DecayFit,
    FIdentityReport, PhaseDrift, ProfileSnapshot, XtNorm,
};
use crate::integrator::{evolve, prepare_initial, Trajectory};
use crate::io::{self, ArtifactHeader, RecordRow};
use crate::nonlinearity::RhsMode;
use crate::{Error, Result};

/// Environment variable naming the directory under which runs are written.
pub const OUTPUT_ROOT_ENV: &str = "HFSCAT_OUT";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("hfscat-runs"))
}

/// Directory of a run below `root`.
pub fn run_dir(cfg: &RunConfig, root: &Path) -> PathBuf {
    let leaf = match (&cfg.output_dir, cfg.name.is_empty()) {
        (Some(d), _) => d.clone(),
        (None, false) => cfg.name.clone(),
        (None, true) => format!("run-{}", &cfg.hash()[..12]),
    };
    root.join(leaf)
}

/// Cross-check of the two remainder computations at one probe time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemainderCrossCheck {
    pub s: f64,
    /// `max_ξ ‖R_q − R_fd‖_{L²_ω}`.
    pub max_difference: f64,
    /// `max_ξ ‖R_fd‖_{L²_ω}` on the coarse frequencies.
    pub fd_sup: f64,
    pub scale: f64,
    /// `max_ξ (‖R_q − R_fd‖ − 0.1‖R_fd‖ − 1e-6·scale)`; nonpositive when
    /// the check holds at every frequency.
    pub worst_excess: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub header: ArtifactHeader,
    pub name: String,
    pub steps: usize,
    pub snapshots: usize,
    pub mass_drift: f64,
    pub gram_drift: f64,
    pub max_boundary_mass_fraction: f64,
    pub sup_decay_exponent: Option<f64>,
    pub sup_decay: Option<DecayFit>,
    pub xt_norm: Option<XtNorm>,
    pub cauchy: Vec<CauchyDistances>,
    pub cauchy_exponent: Option<f64>,
    pub cauchy_fit: Option<DecayFit>,
    pub s1_distances: Vec<(f64, f64)>,
    pub s1_exponent: Option<f64>,
    pub phase_drift: Option<PhaseDrift>,
    /// `(s, sup_ξ ‖R_fd(s, ξ)‖_{L²_ω})` at every probe center.
    pub remainder_sup: Vec<(f64, f64)>,
    pub remainder_exponent: Option<f64>,
    pub remainder_cross_check: Option<RemainderCrossCheck>,
    pub f_identity: Option<FIdentityReport>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

pub fn simulate(cfg: &RunConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let grid = cfg.make_grid()?;
    let initial = prepare_initial(&cfg.initial, &grid, cfg.integrator.t_start)?;
    let traj = evolve(&cfg.integrator_config(), &initial, &cfg.potential, cfg.mode)?;
    Ok(traj.with_config_hash(cfg.hash()))
}

fn is_schedule_time(schedule: &[f64], t: f64) -> bool {
    schedule.iter().any(|s| (s - t).abs() <= 1e-9 * t.max(1.0))
}

fn in_window(t: f64, (lo, hi): (f64, f64)) -> bool {
    t >= lo * (1.0 - 1e-9) && t <= hi * (1.0 + 1e-9)
}

fn fit_or_note(series: &[(f64, f64)], window: (f64, f64), what: &str, notes: &mut Vec<String>) -> Option<DecayFit> {
    match decay_fit(series, window) {
        Ok(f) => Some(f),
        Err(e) => {
            notes.push(format!("{what}: {e}"));
            None
        }
    }
}

/// Profiles at the schedule times, in time order.
pub fn schedule_profiles(cfg: &RunConfig, traj: &Trajectory) -> Vec<ProfileSnapshot> {
    let schedule = cfg.schedule();
    traj.snapshots()
        .iter()
        .filter(|s| is_schedule_time(&schedule, s.time()))
        .map(profile)
        .collect()
}

/// Pairs `(t, 2t)` of schedule times with `t` in the fit window.
pub fn cauchy_series(cfg: &RunConfig, profiles: &[ProfileSnapshot]) -> Result<Vec<CauchyDistances>> {
    let mut out = Vec::new();
    for p in profiles {
        if !in_window(p.t, cfg.fit.window) {
            continue;
        }
        if let Some(q) = profiles.iter().find(|q| (q.t - 2.0 * p.t).abs() <= 1e-9 * q.t) {
            out.push(scattering_cauchy(p, q, &cfg.fit)?);
        }
    }
    Ok(out)
}

/// Finite-difference remainder sup-norms at the probe centers.
pub fn remainder_series(cfg: &RunConfig, traj: &Trajectory) -> Result<Vec<(f64, f64)>> {
    let h = cfg.fit.fd_step;
    let mut out = Vec::new();
    for s in cfg.probe_centers() {
        let (Some(a), Some(b)) = (traj.at_time(s * (1.0 - h)), traj.at_time(s * (1.0 + h))) else {
            continue;
        };
        let r = remainder_fd_orbitals(&profile(a), &profile(b))?;
        out.push((s, sup_aggregate(a.weights(), &r)));
    }
    Ok(out)
}

/// Compares the quadrature remainder on the coarse grid with the
/// finite-difference remainder of the run at `s`.
pub fn remainder_cross_check(cfg: &RunConfig, traj: &Trajectory, s: f64) -> Result<RemainderCrossCheck> {
    let h = cfg.fit.fd_step;
    let missing = || Error::InsufficientData(format!("no probe snapshots around s = {s}"));
    let minus = traj.at_time(s * (1.0 - h)).ok_or_else(missing)?;
    let plus = traj.at_time(s * (1.0 + h)).ok_or_else(missing)?;
    let center = traj.at_time(s).ok_or_else(missing)?;
    let fd = remainder_fd_orbitals(&profile(minus), &profile(plus))?;
    let p = profile(center);
    let coarse = cfg.coarse_grid()?;
    let quad = remainder_quadrature(&p, &cfg.potential, &coarse)?;
    let fine = center.grid();
    let scale = remainder_scale(&p, &cfg.potential);
    let weights = center.weights();
    let mut max_difference: f64 = 0.0;
    let mut fd_sup: f64 = 0.0;
    let mut worst_excess = f64::NEG_INFINITY;
    for (k, &xi) in coarse.frequencies().iter().enumerate() {
        let slot = fine.nearest_mode(xi);
        let mut diff2 = 0.0;
        let mut fd2 = 0.0;
        for (m, a) in weights.iter().enumerate() {
            let f: Complex64 = fd[m][slot];
            diff2 += a * (quad[m][k] - f).norm_sqr();
            fd2 += a * f.norm_sqr();
        }
        let (d, f) = (diff2.sqrt(), fd2.sqrt());
        max_difference = max_difference.max(d);
        fd_sup = fd_sup.max(f);
        worst_excess = worst_excess.max(d - 0.1 * f - 1e-6 * scale);
    }
    Ok(RemainderCrossCheck {
        s,
        max_difference,
        fd_sup,
        scale,
        worst_excess,
        passed: worst_excess <= 0.0,
    })
}

/// Every diagnostic of a finished run.
pub fn analyze(cfg: &RunConfig, traj: &Trajectory) -> Result<RunReport> {
    let grid = traj.grid();
    let header = ArtifactHeader::new(&cfg.hash(), grid, &cfg.potential, cfg.mode);
    let mut notes = Vec::new();
    let recs = records(traj, cfg.integrator.boundary_band);
    let m0 = traj.first().trace_mass();
    let mass_drift = recs
        .iter()
        .map(|r| {
            if m0 > 0.0 {
                (r.l2_mass - m0).abs() / m0
            } else {
                r.l2_mass.abs()
            }
        })
        .fold(0.0, f64::max);
    let gram_drift = recs.iter().map(|r| r.gram_drift).fold(0.0, f64::max);
    let max_boundary = recs.iter().map(|r| r.boundary_mass_fraction).fold(0.0, f64::max);
    let schedule = cfg.schedule();
    let sched_recs: Vec<_> = recs
        .iter()
        .filter(|r| is_schedule_time(&schedule, r.t))
        .cloned()
        .collect();
    let sup_series: Vec<(f64, f64)> = sched_recs.iter().map(|r| (r.t, r.sup_norm)).collect();
    let sup_decay = fit_or_note(&sup_series, cfg.fit.window, "sup_decay", &mut notes);
    let xt_norm = match XtNorm::from_records(&sched_recs, &cfg.fit) {
        Ok(x) => Some(x),
        Err(e) => {
            notes.push(format!("xt_norm: {e}"));
            None
        }
    };

    let profiles = schedule_profiles(cfg, traj);
    let cauchy = cauchy_series(cfg, &profiles)?;
    let cauchy_pts: Vec<(f64, f64)> = cauchy.iter().map(|c| (c.t1, c.d_inf)).collect();
    let cauchy_fit = fit_or_note(&cauchy_pts, cfg.fit.window, "cauchy", &mut notes);

    let s1_distances = if traj.len() >= 4 {
        let schedule_traj = Trajectory::new(
            traj.meta.clone(),
            traj.snapshots()
                .iter()
                .filter(|s| is_schedule_time(&schedule, s.time()))
                .cloned()
                .collect(),
        )?;
        operator_scattering(&schedule_traj, cfg.fit.tail_fraction)?.distances
    } else {
        notes.push("operator scattering: fewer than four snapshots".into());
        Vec::new()
    };
    let s1_fit = fit_or_note(&s1_distances, cfg.fit.operator_window, "s1", &mut notes);

    let phase_series: Vec<ProfileSnapshot> = profiles
        .iter()
        .filter(|p| in_window(p.t, cfg.fit.window))
        .cloned()
        .collect();
    let phase = match phase_drift(&phase_series, cfg.fit.phase_probe) {
        Ok(p) => Some(p),
        Err(e) => {
            notes.push(format!("phase_drift: {e}"));
            None
        }
    };

    let remainder_sup = remainder_series(cfg, traj)?;
    let remainder_fit = fit_or_note(&remainder_sup, cfg.fit.remainder_window, "remainder", &mut notes);
    let cross = if cfg.mode == RhsMode::HartreeFock {
        match remainder_cross_check(cfg, traj, cfg.checks.cross_check_time) {
            Ok(c) => Some(c),
            Err(e) => {
                notes.push(format!("remainder cross-check: {e}"));
                None
            }
        }
    } else {
        None
    };
    let f_identity = traj
        .at_time(cfg.checks.cross_check_time)
        .map(|s| f_identity_check(&profile(s), &cfg.potential, cfg.checks.f_samples, cfg.seed));

    Ok(RunReport {
        header,
        name: cfg.name.clone(),
        steps: traj.steps,
        snapshots: traj.len(),
        mass_drift,
        gram_drift,
        max_boundary_mass_fraction: max_boundary,
        sup_decay_exponent: sup_decay.as_ref().map(|f| f.exponent),
        sup_decay,
        xt_norm,
        cauchy,
        cauchy_exponent: cauchy_fit.as_ref().map(|f| f.exponent),
        cauchy_fit,
        s1_distances,
        s1_exponent: s1_fit.map(|f| f.exponent),
        phase_drift: phase,
        remainder_sup,
        remainder_exponent: remainder_fit.map(|f| f.exponent),
        remainder_cross_check: cross,
        f_identity,
        warnings: traj.warnings.clone(),
        notes,
    })
}

/// Writes checkpoint, diagnostics and report for a finished run.
pub fn write_run(cfg: &RunConfig, traj: &Trajectory, report: &RunReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let header = &report.header;
    let schedule = cfg.schedule();
    let first = traj.first();
    let rows: Vec<RecordRow> = traj
        .snapshots()
        .iter()
        .map(|s| RecordRow {
            record: crate::diagnostics::record(s, first, cfg.integrator.boundary_band),
            probe: !is_schedule_time(&schedule, s.time()),
        })
        .collect();
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    io::write_checkpoint(&dir.join("checkpoint.bin"), header, traj.snapshots())?;
    io::write_ndjson(&dir.join("diagnostics.ndjson"), header, &rows)?;
    io::write_csv(&dir.join("diagnostics.csv"), header, &rows)?;
    io::write_json(&dir.join("report.json"), report)?;
    Ok(())
}

/// Runs `cfg` and writes its artifacts into `dir`.
pub fn cmd_run(cfg: &RunConfig, dir: &Path) -> Result<RunReport> {
    let traj = simulate(cfg)?;
    let report = analyze(cfg, &traj)?;
    write_run(cfg, &traj, &report, dir)?;
    Ok(report)
}

/// Phase and Cauchy summary of one side of a comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: RhsMode,
    pub phase_drift: Option<PhaseDrift>,
    pub cauchy: Vec<CauchyDistances>,
    pub cauchy_exponent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub config_hash: String,
    pub artifact_version: String,
    pub hartree_fock: ModeSummary,
    pub reduced_hartree: ModeSummary,
    /// `|slope_HF| / |slope_RH|`, absent when undefined.
    pub ratio: Option<f64>,
    pub warnings: Vec<String>,
}

/// Runs the configuration under Hartree-Fock and reduced Hartree (or twice
/// linearly for a linear config) and writes both runs plus `compare.json`.
pub fn cmd_compare(cfg: &RunConfig, dir: &Path) -> Result<CompareReport> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    let (mode_a, mode_b) = if cfg.mode == RhsMode::Linear {
        warnings.push("linear configuration: both sides run the linear flow".to_string());
        (RhsMode::Linear, RhsMode::Linear)
    } else {
        (RhsMode::HartreeFock, RhsMode::ReducedHartree)
    };
    let side = |mode: RhsMode| -> Result<(RunConfig, RunReport)> {
        let c = RunConfig { mode, ..cfg.clone() };
        let sub = dir.join(mode.name());
        let report = cmd_run(&c, &sub)?;
        Ok((c, report))
    };
    let (a, b) = rayon::join(|| side(mode_a), || side(mode_b));
    let (_, ra) = a?;
    let (_, rb) = b?;
    let summary = |r: &RunReport, mode| ModeSummary {
        mode,
        phase_drift: r.phase_drift.clone(),
        cauchy: r.cauchy.clone(),
        cauchy_exponent: r.cauchy_exponent,
    };
    let slope = |r: &RunReport| r.phase_drift.as_ref().map(|p| p.slope);
    let ratio = match (slope(&ra), slope(&rb)) {
        (Some(x), Some(y)) if mode_a != mode_b && y != 0.0 && (x / y).is_finite() => Some((x / y).abs()),
        _ => {
            warnings.push("phase-drift ratio undefined".to_string());
            None
        }
    };
    let report = CompareReport {
        config_hash: cfg.hash(),
        artifact_version: crate::ARTIFACT_VERSION.to_string(),
        hartree_fock: summary(&ra, mode_a),
        reduced_hartree: summary(&rb, mode_b),
        ratio,
        warnings,
    };
    io::write_json(&dir.join("compare.json"), &report)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub quantity: String,
    pub exponent: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

/// Quantities accepted by [`cmd_fit`].
pub const FIT_QUANTITIES: [&str; 8] = [
    "sup_norm",
    "l2_mass",
    "h10_x",
    "h01_z",
    "gram_drift",
    "d_inf",
    "s1_distance",
    "remainder_sup",
];

/// Power-law fit of a stored series over `window`.
pub fn cmd_fit(run_dir: &Path, quantity: &str, window: (f64, f64)) -> Result<FitRecord> {
    let series: Vec<(f64, f64)> = match quantity {
        "sup_norm" | "l2_mass" | "h10_x" | "h01_z" | "gram_drift" => {
            let path = run_dir.join("diagnostics.ndjson");
            if !path.exists() {
                return Err(Error::InsufficientData(format!("{} not found", path.display())));
            }
            let (_, rows) = io::read_ndjson(&path)?;
            rows.iter()
                .filter(|r| !r.probe)
                .map(|r| {
                    let rec = &r.record;
                    let v = match quantity {
                        "sup_norm" => rec.sup_norm,
                        "l2_mass" => rec.l2_mass,
                        "h10_x" => rec.h10_x,
                        "h01_z" => rec.h01_z,
                        _ => rec.gram_drift,
                    };
                    (rec.t, v)
                })
                .collect()
        }
        "d_inf" | "s1_distance" | "remainder_sup" => {
            let path = run_dir.join("report.json");
            if !path.exists() {
                return Err(Error::InsufficientData(format!("{} not found", path.display())));
            }
            let report: RunReport = io::read_json(&path)?;
            match quantity {
                "d_inf" => report.cauchy.iter().map(|c| (c.t1, c.d_inf)).collect(),
                "s1_distance" => report.s1_distances,
                _ => report.remainder_sup,
            }
        }
        other => {
            return Err(Error::arg(format!(
                "unknown quantity `{other}`; expected one of {}",
                FIT_QUANTITIES.join(", ")
            )))
        }
    };
    let fit = decay_fit(&series, window)?;
    Ok(FitRecord {
        quantity: quantity.to_string(),
        exponent: fit.exponent,
        stderr: fit.stderr,
        window,
        n_points: fit.n_points,
    })
}

/// Parses `t_lo:t_hi`.
pub fn parse_window(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Error::arg(format!("window `{s}` is not of the form t_lo:t_hi")))?;
    let lo: f64 = a.trim().parse().map_err(|_| Error::arg(format!("bad t_lo `{a}`")))?;
    let hi: f64 = b.trim().parse().map_err(|_| Error::arg(format!("bad t_hi `{b}`")))?;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::arg(format!("window `{s}` must satisfy 0 < t_lo < t_hi")));
    }
    Ok((lo, hi))
}

/// Process exit code for an error: 2 for configuration problems, 3 for
/// numerical aborts, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } => 2,
        Error::NumericalAbort { .. } => 3,
        _ => 1,
    }
}

/// Machine-readable error description.
pub fn error_json(e: &Error) -> serde_json::Value {
    let kind = match e {
        Error::Config { .. } => "config",
        Error::NumericalAbort { .. } => "numerical_abort",
        Error::InsufficientData(_) => "insufficient_data",
        Error::Io(_) => "io",
        _ => "error",
    };
    let mut v = serde_json::json!({
        "error": kind,
        "message": e.to_string(),
        "exit_code": exit_code(e),
    });
    match e {
        Error::Config { field, .. } => v["field"] = serde_json::json!(field),
        Error::NumericalAbort { t, .. } => v["t"] = serde_json::json!(t),
        _ => {}
    }
    v
}
