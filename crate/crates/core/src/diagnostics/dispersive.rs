use serde::{Deserialize, Serialize};

use crate::grid::{forward_transform, free_propagate, ComplexField};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersiveRow {
    pub t: f64,
    /// `‖e^{itΔ} g‖_∞`.
    pub lhs: f64,
    /// `t^{-1/2}‖ĝ‖_∞ + t^{-1/2-2β}‖⟨x⟩^γ g‖₂`.
    pub rhs: f64,
    /// `lhs / rhs`, zero when both vanish.
    pub ratio: f64,
    /// `t^{1/2} lhs / ‖ĝ‖_∞`.
    pub leading_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersiveReport {
    pub fourier_sup: f64,
    pub weighted_l2: f64,
    /// Largest `ratio` over the rows with `t ≥ 2`.
    pub constant: f64,
    pub rows: Vec<DispersiveRow>,
}

/// Measures the implied constant of
/// `‖e^{itΔ}g‖_∞ ≲ t^{-1/2}‖ĝ‖_∞ + t^{-1/2-2β}‖g‖_{H^{0,γ}}`.
pub fn dispersive_estimate_check(
    g: &ComplexField,
    t_list: &[f64],
    beta: f64,
    gamma_exp: f64,
) -> Result<DispersiveReport> {
    if !(beta > 0.0 && gamma_exp > 0.5 + 2.0 * beta) {
        return Err(Error::arg("need β > 0 and γ > 1/2 + 2β"));
    }
    if t_list.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::arg("times must be positive"));
    }
    let grid = g.grid();
    let fourier_sup = forward_transform(g).sup_norm();
    let weighted_l2 = (g
        .values()
        .iter()
        .zip(grid.nodes())
        .map(|(v, x)| (1.0 + x * x).powf(gamma_exp) * v.norm_sqr())
        .sum::<f64>()
        * grid.dx())
    .sqrt();
    let rows: Vec<DispersiveRow> = t_list
        .iter()
        .map(|&t| {
            let lhs = free_propagate(g, t).sup_norm();
            let rhs = t.powf(-0.5) * fourier_sup + t.powf(-0.5 - 2.0 * beta) * weighted_l2;
            DispersiveRow {
                t,
                lhs,
                rhs,
                ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 },
                leading_ratio: if fourier_sup > 0.0 {
                    t.sqrt() * lhs / fourier_sup
                } else {
                    0.0
                },
            }
        })
        .collect();
    let constant = rows.iter().filter(|r| r.t >= 2.0).map(|r| r.ratio).fold(0.0, f64::max);
    Ok(DispersiveReport {
        fourier_sup,
        weighted_l2,
        constant,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use num_complex::Complex64;

    #[test]
    fn zero_field_reports_zero() {
        let g = Grid::new(64, 16.0).unwrap();
        let r = dispersive_estimate_check(&ComplexField::zeros(&g), &[1.0, 2.0, 4.0], 0.125, 1.0).unwrap();
        assert_eq!(r.constant, 0.0);
        assert!(r.rows.iter().all(|row| row.ratio == 0.0));
    }

    #[test]
    fn rejects_small_gamma() {
        let g = Grid::new(64, 16.0).unwrap();
        assert!(dispersive_estimate_check(&ComplexField::zeros(&g), &[2.0], 0.125, 0.7).is_err());
    }

    #[test]
    fn gaussian_family_is_bounded() {
        let g = Grid::new(8192, 2048.0).unwrap();
        let times: Vec<f64> = (0..=12).map(|j| 2f64.powf(j as f64 / 2.0)).collect();
        for a in [0.5, 1.0, 2.0] {
            let f = ComplexField::from_fn(&g, |x| Complex64::new((-a * x * x).exp(), 0.0));
            let r = dispersive_estimate_check(&f, &times, 0.125, 1.0).unwrap();
            assert!(r.constant <= 2.0, "a={a} {}", r.constant);
            for row in &r.rows {
                assert!(row.leading_ratio <= 2.0, "a={a} t={} {}", row.t, row.leading_ratio);
            }
            // t^{1/2}|e^{itΔ}f(0)| → |f̂(0)|/√2
            let last = r.rows.last().unwrap();
            assert!(
                (last.leading_ratio - 0.5f64.sqrt()).abs() < 1e-3,
                "{}",
                last.leading_ratio
            );
        }
    }
}
