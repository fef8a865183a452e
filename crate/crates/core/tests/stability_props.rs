use std::f64::consts::PI;

use ckdv_core::integrator::SolverConfig;
use ckdv_core::invariants::casimir_v;
use ckdv_core::solitons::{soliton_state, SolitonSpec};
use ckdv_core::stability::{
    check_dh_lower, check_dh_upper, distance_d1, distance_d2, make_perturbation, rescale_to_v,
    run_ground_state_stability, run_soliton_stability, GroundExperiment, PerturbationMode,
    SolitonExperiment, TranslationMode,
};
use ckdv_core::{axpy_state, CoupledState, Grid1D, RealField};
use proptest::prelude::*;

fn grid() -> Grid1D {
    Grid1D::new(40.0 * PI, 512).unwrap()
}

fn unit() -> (SolitonSpec, CoupledState) {
    let spec = SolitonSpec::new(1.0, 0.0).unwrap();
    let s = soliton_state(&spec, &grid(), 2).unwrap();
    (spec, s)
}

fn modes() -> impl Strategy<Value = TranslationMode> {
    prop_oneof![Just(TranslationMode::UOnly), Just(TranslationMode::Both)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quotient_distance_never_exceeds_d1(a in any::<u64>(), b in any::<u64>(), mode in modes()) {
        let g = grid();
        let x = make_perturbation(&g, 2, 1.0, a, PerturbationMode::Mixed).unwrap();
        let y = make_perturbation(&g, 2, 1.0, b, PerturbationMode::Mixed).unwrap();
        let d2 = distance_d2(&x, &y, mode).unwrap().value;
        prop_assert!(d2 <= distance_d1(&x, &y).unwrap());
    }

    #[test]
    fn quotient_distance_is_invariant_under_common_shifts(a in any::<u64>(), s in -40.0..40.0f64, mode in modes()) {
        let (_, sol) = unit();
        let g = grid();
        let x = axpy_state(1.0, &make_perturbation(&g, 2, 0.5, a, PerturbationMode::Mixed).unwrap(), &sol).unwrap();
        let y = sol.shift(2.5);
        let before = distance_d2(&x, &y, mode).unwrap().value;
        let after = distance_d2(&x.shift(s), &y.shift(s), mode).unwrap().value;
        prop_assert!((before - after).abs() < 1e-10);
    }

    #[test]
    fn quotient_distance_satisfies_the_triangle_inequality(a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let g = grid();
        let p = |seed| make_perturbation(&g, 2, 1.0, seed, PerturbationMode::Mixed).unwrap();
        let (x, y, z) = (p(a), p(b), p(c));
        let d = |s: &CoupledState, t: &CoupledState| distance_d2(s, t, TranslationMode::UOnly).unwrap().value;
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-10);
    }

    #[test]
    fn finds_fractional_translations(cells in -50.0..50.0f64) {
        let (_, sol) = unit();
        let g = grid();
        let moved = sol.shift(cells * g.spacing());
        let d = distance_d2(&sol, &moved, TranslationMode::UOnly).unwrap();
        prop_assert!(d.value < 1e-10);
        prop_assert!((d.tau_star + cells * g.spacing()).abs() < 1e-6);
    }

    #[test]
    fn rescaling_hits_the_target(seed in any::<u64>(), target in 0.1..50.0f64) {
        let s = make_perturbation(&grid(), 2, 1.0, seed, PerturbationMode::Mixed).unwrap();
        let r = rescale_to_v(&s, target).unwrap();
        prop_assert!((casimir_v(&r) - target).abs() < 1e-12 * target);
    }
}

#[test]
fn clifford_components_are_ignored_by_translation_when_reference_has_none() {
    let (_, sol) = unit();
    let g = grid();
    let x = axpy_state(1.0, &make_perturbation(&g, 2, 0.3, 4, PerturbationMode::Mixed).unwrap(), &sol).unwrap();
    let a = distance_d2(&x, &sol, TranslationMode::UOnly).unwrap();
    let b = distance_d2(&x, &sol, TranslationMode::Both).unwrap();
    assert!((a.value - b.value).abs() < 1e-12);
}

#[test]
fn translation_direction_sits_on_the_lower_bound_edge() {
    let (spec, sol) = unit();
    let eps = 1e-3;
    let u = sol.u().axpy(eps, &sol.u().deriv(1).unwrap()).unwrap();
    let moved = CoupledState::new(u, sol.phi().to_vec()).unwrap();
    let moved = rescale_to_v(&moved, casimir_v(&sol)).unwrap();
    let low = check_dh_lower(&spec, &moved, TranslationMode::UOnly).unwrap();
    // second order in eps in both quantities, against O(eps) for d_I
    assert!(distance_d2(&moved, &sol, TranslationMode::UOnly).unwrap().value < 1e-5);
    assert!(distance_d1(&moved, &sol).unwrap() > 1e-3);
    assert!(low.lhs.abs() < 1e-9);
    assert!(low.ok, "{low:?}");
}

#[test]
fn clifford_direction_along_the_soliton_breaks_the_lower_bound() {
    // (√(1-ε²) φ, ε φ) lies on the V level set; ΔH = ε⁴ ∫φ³ / 8 while
    // d_II² ≈ ε² ‖φ‖²_{H1}, so the quadratic lower bound fails for small ε
    let (spec, sol) = unit();
    let g = grid();
    for eps in [1e-1_f64, 1e-2, 1e-3] {
        let u = sol.u().scaled((1.0 - eps * eps).sqrt());
        let state = CoupledState::new(u, vec![sol.u().scaled(eps), RealField::zeros(&g)]).unwrap();
        assert!((casimir_v(&state) - casimir_v(&sol)).abs() < 1e-12);
        let low = check_dh_lower(&spec, &state, TranslationMode::UOnly).unwrap();
        assert!(!low.ok, "eps = {eps}: {low:?}");
        assert!((low.lhs - 7.2 * eps.powi(4)).abs() < 1e-2 * 7.2 * eps.powi(4) + 1e-12);
        assert!((low.rhs - 4.8 * eps * eps).abs() < 1e-2 * 4.8 * eps * eps);
    }
}

#[test]
fn upper_bound_needs_the_level_set() {
    // off the V level set ΔH picks up the first-order term -2C∫φh
    let g = grid();
    for c in [1.0, 4.0] {
        let spec = SolitonSpec::new(c, 0.0).unwrap();
        let sol = soliton_state(&spec, &g, 2).unwrap();
        for seed in 0..5 {
            let inc = make_perturbation(&g, 2, 1e-3, seed, PerturbationMode::Mixed).unwrap();
            let raw = axpy_state(1.0, &inc, &sol).unwrap();
            let up = check_dh_upper(&spec, &raw, 1e-3).unwrap();
            assert!(!up.ok, "C = {c}, seed = {seed}: {up:?}");

            let on_level = rescale_to_v(&raw, casimir_v(&sol)).unwrap();
            let d = distance_d1(&on_level, &sol).unwrap();
            let up = check_dh_upper(&spec, &on_level, d).unwrap();
            assert!(up.ok && up.margin > 0.0, "C = {c}, seed = {seed}: {up:?}");
        }
    }
}

#[test]
fn unperturbed_soliton_tracks_itself() {
    let exp = SolitonExperiment {
        speed: 1.0,
        delta: 0.0,
        seeds: vec![0],
        mode: PerturbationMode::Mixed,
        v_rescale: true,
        translation: TranslationMode::UOnly,
        n_components: 2,
        solver: SolverConfig::new(1e-3, 5.0).with_sample_every(250),
    };
    let reports = run_soliton_stability(&grid(), &exp).unwrap();
    let r = &reports[0];
    assert_eq!(r.dh, 0.0);
    assert!(r.ok_upper && r.ok_lower && r.ok_tracking && r.ok_metric);
    assert!(r.series.iter().all(|s| s.d2 < 1e-7), "{:?}", r.series);
    assert_eq!(r.series.len(), 21);
}

#[test]
fn large_perturbations_still_produce_reports() {
    let exp = SolitonExperiment {
        speed: 1.0,
        delta: 0.5,
        seeds: vec![1, 2],
        mode: PerturbationMode::Mixed,
        v_rescale: true,
        translation: TranslationMode::Both,
        n_components: 2,
        solver: SolverConfig::new(1e-3, 1.0).with_sample_every(100),
    };
    let reports = run_soliton_stability(&grid(), &exp).unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0].seed, 1);
    assert!(reports.iter().all(|r| r.ok_metric && r.delta > 0.1));
}

#[test]
fn ground_state_runs() {
    let g = grid();
    let mut exp = GroundExperiment {
        delta: 0.0,
        seeds: vec![0],
        mode: PerturbationMode::Mixed,
        n_components: 2,
        solver: SolverConfig::new(1e-2, 2.0).with_sample_every(10),
    };
    let zero = run_ground_state_stability(&g, &exp).unwrap();
    assert_eq!(zero[0].max_abs, 0.0);

    exp.delta = 1e-2;
    exp.seeds = (0..3).collect();
    exp.solver = SolverConfig::new(1e-3, 5.0).with_sample_every(100);
    for r in run_ground_state_stability(&g, &exp).unwrap() {
        assert!(r.check.ok && r.check.worst_margin > 0.0, "{r:?}");
        assert!(r.sup_excess <= 0.0);
    }
}
