use std::f64::consts::PI;

use ckdv_core::dynamics::{bracket_consistency, grad_h_phi, grad_h_u, rhs};
use ckdv_core::invariants::hamiltonian;
use ckdv_core::stability::{make_perturbation, PerturbationMode};
use ckdv_core::{axpy_state, CoupledState, Grid1D, RealField};
use proptest::prelude::*;

fn grid() -> Grid1D {
    Grid1D::new(40.0 * PI, 256).unwrap()
}

fn random_state(seed: u64, size: f64) -> CoupledState {
    make_perturbation(&grid(), 2, size, seed, PerturbationMode::Mixed).unwrap()
}

fn max_diff(a: &RealField, b: &RealField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Central difference of H along a random direction against the pairing
    /// with the analytic variational derivatives.
    #[test]
    fn gradients_match_directional_derivative(seed in any::<u64>(), size in 0.2..3.0f64) {
        let s = random_state(seed, size);
        let v = random_state(seed.wrapping_mul(31).wrapping_add(7), 1.0);
        let eps = 1e-5;
        let plus = hamiltonian(&axpy_state(eps, &v, &s).unwrap());
        let minus = hamiltonian(&axpy_state(-eps, &v, &s).unwrap());
        let numeric = (plus - minus) / (2.0 * eps);

        let mut analytic = grad_h_u(&s).mul(v.u()).unwrap().integrate();
        for (i, dir) in v.phi().iter().enumerate() {
            analytic += grad_h_phi(&s, i).unwrap().mul(dir).unwrap().integrate();
        }
        let scale = analytic.abs().max(1.0);
        prop_assert!((numeric - analytic).abs() < 1e-6 * scale, "{numeric} vs {analytic}");
    }

    #[test]
    fn rhs_commutes_with_translation(seed in any::<u64>(), a in -20.0..20.0f64) {
        let s = random_state(seed, 1.0);
        let moved = rhs(&s.shift(a)).unwrap();
        let rate = rhs(&s).unwrap();
        prop_assert!(max_diff(&moved.du, &rate.du.shift(a)) < 1e-12);
        for (m, r) in moved.dphi.iter().zip(&rate.dphi) {
            prop_assert!(max_diff(m, &r.shift(a)) < 1e-12);
        }
    }

    #[test]
    fn clifford_rate_is_linear_in_xi(seed in any::<u64>(), alpha in -4.0..4.0f64) {
        let s = random_state(seed, 1.0);
        let scaled_xi = CoupledState::new(
            s.u().clone(),
            s.phi().iter().map(|p| p.scaled(alpha)).collect(),
        )
        .unwrap();
        let base = rhs(&s).unwrap();
        let scaled = rhs(&scaled_xi).unwrap();
        for (a, b) in scaled.dphi.iter().zip(&base.dphi) {
            prop_assert!(max_diff(a, &b.scaled(alpha)) < 1e-12);
        }
    }

    #[test]
    fn bracket_prefers_half_by_a_wide_margin(seed in any::<u64>(), size in 0.2..3.0f64) {
        let r = bracket_consistency(&random_state(seed, size)).unwrap();
        prop_assert_eq!(r.inferred_scale, 0.5);
        prop_assert!(r.residual_half < 1e-8);
        prop_assert!(r.residual_one > 1e6 * r.residual_half.max(1e-300));
    }
}

#[test]
fn u_only_state_follows_kdv() {
    let g = grid();
    let s = CoupledState::new(
        RealField::from_fn(&g, |x| (-x * x / 20.0).exp()).unwrap(),
        vec![RealField::zeros(&g)],
    )
    .unwrap();
    let r = rhs(&s).unwrap();
    assert_eq!(r.dphi[0].max_abs(), 0.0);
    let u = s.u();
    let expect = u
        .deriv(3)
        .unwrap()
        .scaled(-1.0)
        .axpy(-1.0, &u.mul(&u.deriv(1).unwrap()).unwrap())
        .unwrap();
    assert!(max_diff(&r.du, &expect) < 1e-10);
}
