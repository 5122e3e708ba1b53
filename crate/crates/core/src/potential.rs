//! Even, real, finite-measure interaction potentials with closed-form
//! Fourier transforms.

use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::{Error, Result};

/// A point mass `λ` located at `shift`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub mass: f64,
    pub shift: f64,
}

/// Interaction measure `w`. The family is closed: every variant carries its
/// transform in closed form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    /// `λ δ_0`.
    Dirac { mass: f64 },
    /// Gaussian density of total mass `λ` and standard deviation `σ`.
    Gaussian { mass: f64, sigma: f64 },
    /// Uniform density of total mass `λ` on `[-a, a]`.
    Box { mass: f64, half_width: f64 },
    /// Symmetric collection of point masses; every atom at `s` has a partner
    /// of equal mass at `-s`.
    DiracSum { atoms: Vec<Atom> },
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

impl Potential {
    pub fn dirac(mass: f64) -> Self {
        Potential::Dirac { mass }
    }

    pub fn gaussian(mass: f64, sigma: f64) -> Result<Self> {
        let w = Potential::Gaussian { mass, sigma };
        w.validate()?;
        Ok(w)
    }

    pub fn box_mass(mass: f64, half_width: f64) -> Result<Self> {
        let w = Potential::Box { mass, half_width };
        w.validate()?;
        Ok(w)
    }

    pub fn dirac_sum(atoms: Vec<Atom>) -> Result<Self> {
        let w = Potential::DiracSum { atoms };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, name: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidPotential(format!("{name} must be finite")))
            }
        };
        match self {
            Potential::Dirac { mass } => finite(*mass, "mass"),
            Potential::Gaussian { mass, sigma } => {
                finite(*mass, "mass")?;
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(Error::InvalidPotential("sigma must be positive".into()));
                }
                Ok(())
            }
            Potential::Box { mass, half_width } => {
                finite(*mass, "mass")?;
                if !(half_width.is_finite() && *half_width > 0.0) {
                    return Err(Error::InvalidPotential("half_width must be positive".into()));
                }
                Ok(())
            }
            Potential::DiracSum { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::InvalidPotential("dirac_sum needs at least one atom".into()));
                }
                for a in atoms {
                    finite(a.mass, "atom mass")?;
                    finite(a.shift, "atom shift")?;
                }
                // multiset of atoms must be invariant under s -> -s
                let mut unmatched: Vec<Atom> = atoms.iter().filter(|a| a.shift != 0.0).copied().collect();
                while let Some(a) = unmatched.pop() {
                    let partner = unmatched.iter().position(|b| b.shift == -a.shift && b.mass == a.mass);
                    match partner {
                        Some(i) => {
                            unmatched.swap_remove(i);
                        }
                        None => {
                            return Err(Error::InvalidPotential(format!(
                                "atom at {} has no mirror partner at {}",
                                a.shift, -a.shift
                            )))
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// `ŵ(η) = (2π)^{-1/2} ∫ e^{-ixη} dw(x)`.
    pub fn fourier_at(&self, eta: f64) -> f64 {
        match self {
            Potential::Dirac { mass } => mass * INV_SQRT_2PI,
            Potential::Gaussian { mass, sigma } => mass * INV_SQRT_2PI * (-0.5 * sigma * sigma * eta * eta).exp(),
            Potential::Box { mass, half_width } => {
                let z = half_width * eta;
                let sinc = if z.abs() < 1e-8 { 1.0 - z * z / 6.0 } else { z.sin() / z };
                mass * INV_SQRT_2PI * sinc
            }
            Potential::DiracSum { atoms } => {
                INV_SQRT_2PI * atoms.iter().map(|a| a.mass * (a.shift * eta).cos()).sum::<f64>()
            }
        }
    }

    /// `∫ dw = √(2π) ŵ(0)`.
    pub fn total_mass(&self) -> f64 {
        match self {
            Potential::Dirac { mass } | Potential::Gaussian { mass, .. } | Potential::Box { mass, .. } => *mass,
            Potential::DiracSum { atoms } => atoms.iter().map(|a| a.mass).sum(),
        }
    }

    /// Total variation `‖w‖_{M¹}`.
    pub fn m1_norm(&self) -> f64 {
        match self {
            Potential::Dirac { mass } | Potential::Gaussian { mass, .. } | Potential::Box { mass, .. } => mass.abs(),
            Potential::DiracSum { atoms } => atoms.iter().map(|a| a.mass.abs()).sum(),
        }
    }

    pub fn has_density(&self) -> bool {
        matches!(self, Potential::Gaussian { .. } | Potential::Box { .. })
    }

    /// Pointwise density, for the variants that have one.
    pub fn density_at(&self, x: f64) -> Option<f64> {
        match self {
            Potential::Gaussian { mass, sigma } => {
                Some(mass * INV_SQRT_2PI / sigma * (-0.5 * x * x / (sigma * sigma)).exp())
            }
            Potential::Box { mass, half_width } => {
                let v = if x.abs() < *half_width {
                    mass / (2.0 * half_width)
                } else if x.abs() == *half_width {
                    0.5 * mass / (2.0 * half_width)
                } else {
                    0.0
                };
                Some(v)
            }
            _ => None,
        }
    }

    /// Periodized density sampled at offsets `d·dx`, `d = 0..n`, i.e. the
    /// circulant kernel of the periodic convolution. Rejects atomic variants.
    pub fn gridded_density(&self, grid: &Grid) -> Result<Vec<f64>> {
        if !self.has_density() {
            return Err(Error::InvalidPotential(
                "atomic potentials have no gridded density".into(),
            ));
        }
        let l = grid.length();
        let images = match self {
            Potential::Gaussian { sigma, .. } => (12.0 * sigma / l).ceil() as i64 + 1,
            Potential::Box { half_width, .. } => (half_width / l).ceil() as i64 + 1,
            _ => unreachable!(),
        };
        Ok((0..grid.n_points())
            .map(|d| {
                let x = d as f64 * grid.dx();
                (-images..=images)
                    .map(|m| self.density_at(x + m as f64 * l).unwrap_or(0.0))
                    .sum()
            })
            .collect())
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Potential::Dirac { .. } => "dirac",
            Potential::Gaussian { .. } => "gaussian",
            Potential::Box { .. } => "box",
            Potential::DiracSum { .. } => "dirac_sum",
        }
    }
}

/// Upper bound `(2π)^{-1/2} ‖w‖_{M¹}` on `|ŵ|`.
pub fn fourier_bound(w: &Potential) -> f64 {
    INV_SQRT_2PI * w.m1_norm()
}
