//! Randomized invariants of the generator, propagators and closed forms.

use photodet::evolution::{evolve_state_with, k_term_curves, propagate, Picture};
use photodet::model::{build_generator, build_reduced_generator, product_state};
use photodet::ode::linspace;
use photodet::operators::{OperatorMatrix, StateMatrix, C64};
use photodet::oracles;
use photodet::ModelParams;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn rates() -> impl Strategy<Value = ModelParams> {
    (0.05f64..2.0, 0.2f64..3.0, 0.05f64..3.0, -3.0f64..3.0).prop_map(|(kappa, gamma1, gamma2, detuning)| ModelParams {
        kappa,
        gamma1,
        gamma2,
        detuning,
        ..ModelParams::default()
    })
}

fn weak_amplifier() -> impl Strategy<Value = ModelParams> {
    (rates(), 0.0f64..0.25, 0.5f64..2.0, -1.0f64..1.0).prop_map(|(p, drive, amp_decay, amp_detuning)| ModelParams {
        drive,
        amp_decay,
        amp_detuning,
        n_c: 10,
        ..p
    })
}

fn matrix(n: usize) -> impl Strategy<Value = DMatrix<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n)
        .prop_map(move |v| DMatrix::from_iterator(n, n, v.into_iter().map(|(re, im)| C64::new(re, im))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn p_abs_is_a_probability(p in rates()) {
        let v = oracles::p_abs(&p).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        let resonant = oracles::p_abs(&ModelParams { detuning: 0.0, ..p }).unwrap();
        prop_assert!(v <= resonant + 1e-15);
    }

    #[test]
    fn lossless_scattering(p in rates(), w in -50.0f64..50.0) {
        let total = oracles::transmission(w, &p).norm_sqr() + oracles::reflection(w, &p).norm_sqr();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overlap_equals_closed_form(p in rates()) {
        let d = oracles::p_abs_overlap(&p).unwrap() - oracles::p_abs(&p).unwrap();
        prop_assert!(d.abs() < 1e-6, "{d}");
    }

    #[test]
    fn full_space_evolution_is_a_valid_state(p in weak_amplifier()) {
        let gen = build_generator(&p).unwrap();
        let rho0 = product_state(gen.space(), 1, 0).unwrap();
        evolve_state_with(&gen, &rho0, &linspace(0.0, 6.0, 7), |_, _t, s| {
            assert!((s.trace() - 1.0).norm() < 1e-9);
            assert!(s.min_eigenvalue() > -1e-9, "min eig {} at t={}", s.min_eigenvalue(), _t);
            Ok(())
        }).unwrap();
    }

    #[test]
    fn pictures_are_dual(p in rates(), g in matrix(6), o in matrix(6), t in 0.1f64..5.0) {
        let gen = build_reduced_generator(&p).unwrap();
        let space = gen.space().clone();
        let rho = &g * g.adjoint();
        let rho = StateMatrix::new(space.clone(), &rho / rho.trace(), 1e-10).unwrap();
        let rho = OperatorMatrix::new(space.clone(), rho.entries().clone()).unwrap();
        let o = OperatorMatrix::new(space, o).unwrap();
        let rho_t = propagate(&gen, Picture::Schrodinger, &rho, &[0.0, t]).unwrap().pop().unwrap();
        let o_t = propagate(&gen, Picture::Heisenberg, &o, &[0.0, t]).unwrap().pop().unwrap();
        let d = (&o * &rho_t).trace() - (&o_t * &rho).trace();
        prop_assert!(d.norm() < 1e-8, "{d}");
    }

    #[test]
    fn k_terms_keep_their_structure(p in rates()) {
        let gen = build_reduced_generator(&ModelParams { detuning: 0.0, ..p }).unwrap();
        let curves = k_term_curves(&gen, &linspace(0.0, 40.0, 81)).unwrap();
        let limit = p.gamma2 / (p.gamma1 + p.gamma2);
        prop_assert!((curves[1].last().re - limit).abs() < 1e-3);
        for i in 0..81 {
            prop_assert!((curves[3].values()[i] - 1.0).norm() < 1e-9);
            prop_assert!(curves[5].values()[i].norm() < 1e-9);
        }
    }
}

#[test]
fn halving_tolerances_does_not_move_steady_values() {
    let coarse = ModelParams::default();
    let mut fine = coarse;
    fine.tolerances.rtol /= 2.0;
    fine.tolerances.atol /= 2.0;
    let k1 = |p: &ModelParams| {
        let gen = build_reduced_generator(p).unwrap();
        k_term_curves(&gen, &[0.0, 50.0]).unwrap()[0].last().re
    };
    assert!((k1(&coarse) - k1(&fine)).abs() < 1e-6);
}
