//! Randomized properties of the building blocks.

use msmix::chart::{forward_chart, inverse_chart, NormalizedState};
use msmix::numerics::{lu_solve, min_symmetric_eigenvalue, symmetric_eigenvalues, SmallMatrix};
use msmix::thermo::SpeciesSet;
use msmix::transport::{
    build_b, driving_forces, ln_sigma, onsager_matrix, sigma, solve_flux, FrictionKind,
    FrictionModel,
};
use msmix::verify::catalogue;
use proptest::prelude::*;

fn species(blended: bool) -> SpeciesSet {
    if blended {
        catalogue::blended3()
    } else {
        catalogue::log3()
    }
}

/// Positive densities spanning several decades of total density.
fn densities() -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(0.05f64..1.0, 3), -3.0f64..3.0)
        .prop_map(|(y, e)| y.iter().map(|v| v * 10f64.powf(e)).collect())
}

fn dominant_matrix(n: usize) -> impl Strategy<Value = SmallMatrix> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
        SmallMatrix::from_fn(n, |i, j| {
            if i == j {
                n as f64 + 1.0 + v[i * n + j].abs()
            } else {
                v[i * n + j]
            }
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lu_solve_inverts_the_product(
        (a, b) in (1usize..8).prop_flat_map(|n| (dominant_matrix(n), prop::collection::vec(-10.0f64..10.0, n)))
    ) {
        let x = lu_solve(&a, &b).unwrap();
        let r = a.matvec(&x);
        let bn = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = r.iter().zip(&b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        prop_assert!(err <= 1e-10 * (1.0 + bn));
    }

    #[test]
    fn eigenvalues_of_a_gram_matrix(v in prop::collection::vec(-2.0f64..2.0, 16), shift in 0.0f64..3.0) {
        let a = SmallMatrix::from_fn(4, |i, j| v[i * 4 + j]);
        let g = a.transpose().matmul(&a).symmetrized().shifted(shift);
        let ev = symmetric_eigenvalues(&g).unwrap();
        let sum: f64 = ev.iter().sum();
        prop_assert!((sum - g.trace()).abs() <= 1e-10 * (1.0 + g.trace().abs()));
        prop_assert!(min_symmetric_eigenvalue(&g).unwrap() >= shift - 1e-9 * g.norm_inf());
    }

    #[test]
    fn thermodynamic_identities(rho in densities(), blended in any::<bool>()) {
        let sp = species(blended);
        let st = sp.state(&rho).unwrap();
        let mu = st.chem_potentials();
        let euler = st.p + st.free_energy() - rho.iter().zip(&mu).map(|(r, m)| r * m).sum::<f64>();
        prop_assert!(euler.abs() <= 1e-10 * (1.0 + st.p), "Euler residual {euler}");

        let h = st.hessian();
        let hu = h.matvec(&st.kernel_direction());
        prop_assert!(hu.iter().all(|v| (v - 1.0).abs() <= 1e-8));
        let id = h.matmul(&st.hessian_inverse());
        prop_assert!(id.sub(&SmallMatrix::identity(3)).max_abs() <= 1e-8);
        let gd = h.matvec(&rho);
        let grad = st.pressure_gradient();
        for (a, b) in gd.iter().zip(&grad) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn dual_state_inverts_the_potentials(rho in densities(), blended in any::<bool>()) {
        let sp = species(blended);
        let mu = sp.state(&rho).unwrap().chem_potentials();
        let back = sp.dual_state(&mu).unwrap();
        for (a, b) in back.iter().zip(&rho) {
            prop_assert!(((a - b) / b).abs() <= 1e-8);
        }
    }

    #[test]
    fn chart_round_trip(z in prop::collection::vec(0.01f64..1.0, 3), ls in -3.0f64..3.0, blended in any::<bool>()) {
        let sp = species(blended);
        let w = NormalizedState::project(&sp, &z).unwrap();
        let s = sp.p0() * 10f64.powf(ls);
        let x = forward_chart(&sp, s, &w).unwrap();
        let back = inverse_chart(&sp, &x).unwrap();
        prop_assert!(((back.s - s) / s).abs() <= 1e-10);
        for (a, b) in back.w.as_slice().iter().zip(w.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
        }
    }

    #[test]
    fn sigma_is_symmetric_and_positive(rho in densities(), blended in any::<bool>()) {
        let sp = species(blended);
        let st = sp.state(&rho).unwrap();
        // Stiff species drive σ below the f64 range at high pressure, so
        // positivity is a statement about its logarithm.
        let ls = ln_sigma(&sp, st.p, &st.x).unwrap();
        prop_assert!((0..3).all(|i| (0..3).all(|k| ls[(i, k)].is_finite())));
        prop_assert!(ls.symmetry_defect() <= 1e-12 * (1.0 + ls.max_abs()));
        let s = sigma(&sp, st.p, &st.x).unwrap();
        prop_assert!(s.symmetry_defect() <= 1e-14 * s.max_abs());
    }

    #[test]
    fn fluxes_sum_to_zero_and_dissipate(
        rho in densities(),
        g in prop::collection::vec(-5.0f64..5.0, 9),
        blended in any::<bool>(),
        constant in any::<bool>(),
    ) {
        let sp = species(blended);
        let kind = if constant { FrictionKind::Constant } else { FrictionKind::Singular };
        let model = catalogue::friction(&sp, kind);
        let grad_mu: Vec<[f64; 3]> = (0..3).map(|i| [g[3 * i], g[3 * i + 1], g[3 * i + 2]]).collect();
        let zero = vec![[0.0; 3]; 3];
        let d = driving_forces(&rho, &grad_mu, &zero);
        let b = build_b(&sp, &rho, &model).unwrap();
        let y: Vec<f64> = {
            let t: f64 = rho.iter().sum();
            rho.iter().map(|r| r / t).collect()
        };
        let j = solve_flux(&b, &d, &y).unwrap();
        let jmax = j.iter().flat_map(|v| v.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        for l in 0..3 {
            let s: f64 = j.iter().map(|v| v[l]).sum();
            prop_assert!(s.abs() <= 1e-12 * (1.0 + jmax));
        }
        let zeta: f64 = -(0..3).map(|i| (0..3).map(|l| j[i][l] * grad_mu[i][l]).sum::<f64>()).sum::<f64>();
        prop_assert!(zeta >= -1e-10);

        let m = onsager_matrix(&sp, &rho, &model).unwrap();
        prop_assert!(m.symmetry_defect() <= 1e-12 * m.max_abs());
        prop_assert!(min_symmetric_eigenvalue(&m).unwrap() >= -1e-10 * m.norm_inf());
        let m1 = m.matvec(&[1.0; 3]);
        prop_assert!(m1.iter().all(|v| v.abs() <= 1e-10 * m.norm_inf()));
    }
}

#[test]
fn friction_model_honours_its_certified_constants() {
    let sp = catalogue::log3();
    let model = FrictionModel::new(&sp, 1.0, 0.1, 0.5, FrictionKind::Singular).unwrap();
    let c = model.constants();
    assert!(c.f0 > 0.0 && c.f0 <= c.f1 && c.f2 <= c.f3);
}
