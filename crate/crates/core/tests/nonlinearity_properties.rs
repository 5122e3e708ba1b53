use hfscat::diagnostics::{profile, remainder_quadrature};
use hfscat::ensemble::gaussian_coefficients;
use hfscat::nonlinearity::{direct_term, exchange_dense_oracle_for, exchange_term, mass_production, rhs};
use hfscat::potential::Atom;
use hfscat::{ComplexField, Grid, OrbitalEnsemble, Potential, RhsMode};
use num_complex::Complex64;
use proptest::prelude::*;

fn potential() -> impl Strategy<Value = Potential> {
    prop_oneof![
        (-3.0f64..3.0).prop_map(Potential::dirac),
        (-3.0f64..3.0, 0.3f64..3.0).prop_map(|(m, s)| Potential::gaussian(m, s).unwrap()),
        (-3.0f64..3.0, 0.3f64..3.0).prop_map(|(m, a)| Potential::box_mass(m, a).unwrap()),
        (-3.0f64..3.0, 0.0f64..2.0).prop_map(|(m, s)| Potential::dirac_sum(vec![
            Atom { mass: m, shift: s },
            Atom {
                mass: 0.5 * m,
                shift: -s
            },
            Atom {
                mass: 0.5 * m,
                shift: s
            },
            Atom { mass: m, shift: -s },
        ])
        .unwrap()),
    ]
}

fn smooth_gaussian_potential() -> impl Strategy<Value = Potential> {
    (-3.0f64..3.0, 0.5f64..2.0).prop_map(|(m, s)| Potential::gaussian(m, s).unwrap())
}

/// Orbitals built from seeded modulated Gaussians.
fn ensemble(grid: &Grid, k: usize, seed: u64, amplitude: f64) -> OrbitalEnsemble {
    let weights = (0..k).map(|i| 1.0 / (1.0 + i as f64)).collect();
    let orbitals = (0..k)
        .map(|i| {
            let c = gaussian_coefficients(3, seed.wrapping_add(i as u64));
            ComplexField::from_fn(grid, |x| {
                c.iter()
                    .enumerate()
                    .map(|(j, z)| {
                        let x0 = j as f64 - 1.0;
                        z * amplitude
                            * Complex64::from_polar(1.0, (j as f64 - 1.0) * 0.8 * x)
                            * (-(x - x0) * (x - x0) / 2.0).exp()
                    })
                    .sum()
            })
        })
        .collect();
    OrbitalEnsemble::new(weights, orbitals, 0.0).unwrap()
}

fn sup(fields: &[ComplexField]) -> f64 {
    fields.iter().map(|f| f.sup_norm()).fold(0.0, f64::max)
}

fn cube_scale(ens: &OrbitalEnsemble, w: &Potential) -> f64 {
    let m = ens.orbitals().iter().map(|u| u.sup_norm()).fold(0.0, f64::max);
    ens.weights().iter().sum::<f64>() * m.powi(3) * w.m1_norm().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rank_one_hartree_fock_vanishes(seed in any::<u64>(), w in potential(), amp in 0.1f64..3.0) {
        let g = Grid::new(128, 24.0).unwrap();
        let ens = ensemble(&g, 1, seed, amp);
        let n = rhs(&ens, &w, RhsMode::HartreeFock);
        prop_assert!(sup(&n) <= 1e-12 * cube_scale(&ens, &w));
    }

    #[test]
    fn shared_plane_wave_cancels(
        amps in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0.1f64..3.0), 1..6),
        mode in -15i64..16,
        w in potential(),
    ) {
        let g = Grid::new(64, 12.0).unwrap();
        let weights = amps.iter().map(|a| a.2).collect();
        let orbitals = amps
            .iter()
            .map(|a| ComplexField::plane_wave(&g, mode, Complex64::new(a.0, a.1)).unwrap())
            .collect();
        let ens = OrbitalEnsemble::new(weights, orbitals, 1.0).unwrap();
        let n = rhs(&ens, &w, RhsMode::HartreeFock);
        prop_assert!(sup(&n) <= 1e-12 * cube_scale(&ens, &w).max(1e-300));
        let p = profile(&ens);
        let coarse = Grid::new(16, 12.0).unwrap();
        let r = remainder_quadrature(&p, &w, &coarse).unwrap();
        let worst = r.iter().flat_map(|v| v.iter().map(|c| c.norm())).fold(0.0, f64::max);
        prop_assert!(worst <= 1e-12 * cube_scale(&ens, &w).max(1e-300));
    }

    #[test]
    fn generator_is_self_adjoint(seed in any::<u64>(), k in 1usize..5, w in potential()) {
        let g = Grid::new(128, 24.0).unwrap();
        let ens = ensemble(&g, k, seed, 1.0);
        let direct = direct_term(&ens, &w);
        let scale: f64 = ens
            .weights()
            .iter()
            .zip(ens.orbitals())
            .zip(&direct)
            .map(|((a, u), f)| a * u.l2_norm() * f.l2_norm())
            .sum::<f64>()
            .max(1e-300);
        for mode in [RhsMode::HartreeFock, RhsMode::ReducedHartree] {
            let n = rhs(&ens, &w, mode);
            prop_assert!(mass_production(&ens, &n).abs() <= 1e-12 * scale);
        }
        // ⟨u_a, N_b⟩ − ⟨N_a, u_b⟩ = 0: the Gram matrix is conserved
        let n = rhs(&ens, &w, RhsMode::HartreeFock);
        for a in 0..k {
            for b in 0..k {
                let lhs = ens.orbitals()[a].inner(&n[b]).unwrap();
                let rhs_v = n[a].inner(&ens.orbitals()[b]).unwrap();
                prop_assert!((lhs - rhs_v).norm() <= 1e-12 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn fast_exchange_matches_dense_oracle(seed in any::<u64>(), k in 1usize..5, log_n in 6u32..9, w in smooth_gaussian_potential()) {
        // spacing fixed at 3/16 so the sampled kernel resolves σ ≥ 1/2
        let n = 1usize << log_n;
        let g = Grid::new(n, 0.1875 * n as f64).unwrap();
        let ens = ensemble(&g, k, seed, 1.0);
        let fast = exchange_term(&ens, &w);
        let dense = exchange_dense_oracle_for(&ens, &w).unwrap();
        let scale = sup(&dense);
        for (a, b) in fast.iter().zip(&dense) {
            prop_assert!(a.sub(b).unwrap().sup_norm() <= 1e-10 * scale);
        }
    }
}
