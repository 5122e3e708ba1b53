//! Run configuration (TOML) and the shipped presets.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::FitConfig;
use crate::grid::Grid;
use crate::integrator::{InitialData, IntegratorConfig, PacketKind};
use crate::nonlinearity::RhsMode;
use crate::potential::Potential;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    /// Domain length `L`.
    pub length: f64,
}

/// Settings of the coarse-grid remainder and identity checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSpec {
    pub coarse_n: usize,
    pub coarse_length: f64,
    /// Probe time of the quadrature/finite-difference cross-check.
    pub cross_check_time: f64,
    pub f_samples: usize,
}

impl Default for CheckSpec {
    fn default() -> Self {
        CheckSpec {
            coarse_n: 64,
            coarse_length: 16.0,
            cross_check_time: 4.0,
            f_samples: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: String,
    pub mode: RhsMode,
    #[serde(default)]
    pub seed: u64,
    /// Output directory, relative to the output root.
    #[serde(default)]
    pub output_dir: Option<String>,
    pub grid: GridSpec,
    pub potential: Potential,
    pub initial: InitialData,
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub checks: CheckSpec,
}

pub const PRESET_NAMES: [&str; 4] = [
    "preset-hf-default",
    "preset-contrast",
    "preset-planewave",
    "preset-rank1",
];

const PRESET_HF_DEFAULT: &str = include_str!("../presets/preset-hf-default.toml");
const PRESET_CONTRAST: &str = include_str!("../presets/preset-contrast.toml");
const PRESET_PLANEWAVE: &str = include_str!("../presets/preset-planewave.toml");
const PRESET_RANK1: &str = include_str!("../presets/preset-rank1.toml");

/// TOML source of a shipped preset.
pub fn preset_source(name: &str) -> Option<&'static str> {
    match name {
        "preset-hf-default" => Some(PRESET_HF_DEFAULT),
        "preset-contrast" => Some(PRESET_CONTRAST),
        "preset-planewave" => Some(PRESET_PLANEWAVE),
        "preset-rank1" => Some(PRESET_RANK1),
        _ => None,
    }
}

pub fn preset(name: &str) -> Result<RunConfig> {
    let src = preset_source(name).ok_or_else(|| Error::config("preset", format!("unknown preset `{name}`")))?;
    RunConfig::from_toml(src)
}

fn toml_error(e: toml::de::Error) -> Error {
    // unknown or missing keys carry their name in the message; the span
    // is not mapped back to a dotted path
    let message = e.message().to_string();
    let field = message
        .split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "<document>".into());
    Error::config(field, message)
}

impl RunConfig {
    pub fn from_toml(src: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(src).map_err(toml_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| Error::config("<path>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&src)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grid.n >= 8 && self.grid.n.is_power_of_two()) {
            return Err(Error::config("grid.n", "must be a power of two, at least 8"));
        }
        if !(self.grid.length.is_finite() && self.grid.length > 0.0) {
            return Err(Error::config("grid.length", "must be positive"));
        }
        self.potential
            .validate()
            .map_err(|e| Error::config("potential", e.to_string()))?;
        self.initial.validate()?;
        self.integrator.validate()?;
        if !self.integrator.extra_times.is_empty() {
            return Err(Error::config(
                "integrator.extra_times",
                "probe times are derived from fit.remainder_window",
            ));
        }
        self.fit.validate()?;
        let c = &self.checks;
        if !(c.coarse_n >= 8 && c.coarse_n.is_power_of_two() && c.coarse_n <= 64) {
            return Err(Error::config("checks.coarse_n", "must be a power of two in [8, 64]"));
        }
        let dx = self.grid.length / self.grid.n as f64;
        let ratio = c.coarse_length / c.coarse_n as f64 / dx;
        if !(c.coarse_length > 0.0 && ratio >= 1.0 && (ratio - ratio.round()).abs() < 1e-9) {
            return Err(Error::config(
                "checks.coarse_length",
                "coarse spacing must be a whole multiple of grid.length / grid.n",
            ));
        }
        if c.coarse_length > self.grid.length {
            return Err(Error::config("checks.coarse_length", "must not exceed grid.length"));
        }
        if !(c.cross_check_time.is_finite() && c.cross_check_time >= self.integrator.t_start) {
            return Err(Error::config("checks.cross_check_time", "must be at least t_start"));
        }
        if self
            .output_dir
            .as_deref()
            .is_some_and(|d| d.is_empty() || d.contains(".."))
        {
            return Err(Error::config(
                "output_dir",
                "must be a non-empty relative path without `..`",
            ));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn make_grid(&self) -> Result<Grid> {
        Grid::new(self.grid.n, self.grid.length).map_err(|e| Error::config("grid", e.to_string()))
    }

    pub fn coarse_grid(&self) -> Result<Grid> {
        Grid::new(self.checks.coarse_n, self.checks.coarse_length).map_err(|e| Error::config("checks", e.to_string()))
    }

    /// Geometric schedule without probe times.
    pub fn schedule(&self) -> Vec<f64> {
        self.integrator.snapshot_times()
    }

    /// Schedule points used as finite-difference centers.
    pub fn probe_centers(&self) -> Vec<f64> {
        let (lo, hi) = self.fit.remainder_window;
        let mut centers: Vec<f64> = self
            .schedule()
            .into_iter()
            .filter(|s| *s >= lo * (1.0 - 1e-9) && *s <= hi * (1.0 + 1e-9))
            .collect();
        let x = self.checks.cross_check_time;
        if !centers.iter().any(|s| (s - x).abs() <= 1e-9 * x) {
            centers.push(x);
        }
        let h = self.fit.fd_step;
        let t0 = self.integrator.t_start;
        let t1 = self.integrator.t_end;
        centers.retain(|s| s * (1.0 - h) >= t0 && s * (1.0 + h) <= t1);
        centers.sort_by(|a, b| a.total_cmp(b));
        centers
    }

    /// Integrator settings with the probe times `s(1 ± h)` added.
    pub fn integrator_config(&self) -> IntegratorConfig {
        let h = self.fit.fd_step;
        let mut cfg = self.integrator.clone();
        cfg.extra_times = self
            .probe_centers()
            .into_iter()
            .flat_map(|s| [s * (1.0 - h), s, s * (1.0 + h)])
            .collect();
        cfg
    }

    /// Same run with every packet amplitude multiplied by `factor`.
    pub fn with_amplitude_factor(&self, factor: f64) -> RunConfig {
        RunConfig {
            initial: self.initial.scaled(factor),
            ..self.clone()
        }
    }

    /// Whether the initial data consist of plane waves only.
    pub fn is_plane_wave(&self) -> bool {
        self.initial.packets.iter().all(|p| p.kind == PacketKind::PlaneWave)
    }
}
