use std::f64::consts::PI;

use ckdv_core::integrator::{evolve, step, temporal_convergence, SnapshotRecorder, SolverConfig};
use ckdv_core::solitons::{soliton_state, SolitonSpec};
use ckdv_core::stability::{make_perturbation, PerturbationMode};
use ckdv_core::{CkdvError, Components, CoupledState, Grid1D, RealField};
use proptest::prelude::*;

fn grid() -> Grid1D {
    Grid1D::new(40.0 * PI, 256).unwrap()
}

fn run(s: &CoupledState, dt: f64, t_end: f64) -> CoupledState {
    evolve(s, &SolverConfig::new(dt, t_end).with_sample_every(usize::MAX), &mut [])
        .unwrap()
        .state
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn backward_run_returns_to_start(seed in any::<u64>(), size in 0.1..1.0f64) {
        let s = make_perturbation(&grid(), 2, size, seed, PerturbationMode::Mixed).unwrap();
        let there = run(&s, 1e-3, 1.0);
        let back = run(&there, -1e-3, 1.0);
        prop_assert!(back.sub(&s).unwrap().max_abs() < 1e-7);
    }

    #[test]
    fn reruns_are_bitwise_identical(seed in any::<u64>()) {
        let s = make_perturbation(&grid(), 2, 1.0, seed, PerturbationMode::Mixed).unwrap();
        prop_assert_eq!(run(&s, 1e-3, 0.2), run(&s, 1e-3, 0.2));
    }
}

#[test]
fn single_steps_agree_with_evolve() {
    let s = make_perturbation(&grid(), 2, 1.0, 5, PerturbationMode::Mixed).unwrap();
    let mut manual = s.clone();
    for _ in 0..10 {
        manual = step(&manual, 1e-2).unwrap();
    }
    let evolved = run(&s, 1e-2, 0.1);
    assert!(manual.sub(&evolved).unwrap().max_abs() < 1e-14);
}

#[test]
fn snapshots_follow_the_sampling_schedule() {
    let s = make_perturbation(&grid(), 1, 0.1, 1, PerturbationMode::Mixed).unwrap();
    let mut rec = SnapshotRecorder::default();
    let out = evolve(&s, &SolverConfig::new(0.01, 0.25).with_sample_every(10), &mut [&mut rec]).unwrap();
    assert_eq!(out.steps, 25);
    let times: Vec<f64> = rec.snapshots.iter().map(|(t, _)| *t).collect();
    assert_eq!(times, vec![0.0, 0.1, 0.2, 0.25]);
    assert_eq!(times, out.times);
    assert_eq!(rec.snapshots[0].1, s);
}

#[test]
fn oversized_step_blows_up() {
    let g = Grid1D::new(40.0 * PI, 512).unwrap();
    let s = soliton_state(&SolitonSpec::new(4.0, 0.0).unwrap(), &g, 1).unwrap();
    let cfg = SolverConfig::new(0.5, 50.0).allowing_large_dt();
    let err = evolve(&s, &cfg, &mut []).unwrap_err();
    assert!(matches!(err, CkdvError::BlowUp { .. }), "{err}");
    assert!(err.to_string().starts_with("blow-up or instability detected at t = "));
}

#[test]
fn step_ceiling_is_enforced_unless_waived() {
    let g = Grid1D::new(40.0 * PI, 512).unwrap();
    let s = soliton_state(&SolitonSpec::new(1.0, 0.0).unwrap(), &g, 1).unwrap();
    let err = evolve(&s, &SolverConfig::new(1.0, 1.0), &mut []).unwrap_err();
    assert!(matches!(err, CkdvError::TimeStepTooLarge { .. }));
}

#[test]
fn fourth_order_in_time() {
    let g = Grid1D::new(40.0 * PI, 512).unwrap();
    let s = soliton_state(&SolitonSpec::new(1.0, 0.0).unwrap(), &g, 2).unwrap();
    let study = temporal_convergence(&s, 1.0, &[0.005, 0.0025, 0.00125, 0.000625], 6.25e-5).unwrap();
    for pair in study.errors.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((12.0..=20.0).contains(&ratio), "{:?}", study.errors);
    }
}

#[test]
fn linear_mode_is_exact_for_any_step() {
    // tiny amplitude keeps the quadratic terms below rounding
    let g = Grid1D::new(2.0 * PI, 32).unwrap();
    let eps = 1e-9;
    let u = RealField::from_fn(&g, |x| eps * (2.0 * x).cos()).unwrap();
    let s = CoupledState::new(u, vec![RealField::zeros(&g)]).unwrap();
    let out = evolve(&s, &SolverConfig::new(0.05, 1.0).allowing_large_dt(), &mut []).unwrap();
    // cos(2x) under u_t = -u''' becomes cos(2x + 8t)
    let err = out
        .state
        .u()
        .values()
        .iter()
        .zip(g.nodes())
        .map(|(v, x)| (v - eps * (2.0 * x + 8.0).cos()).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-12 * 1e3 * eps, "{err}");
    assert_eq!(out.state.phi()[0].max_abs(), 0.0);
    assert_eq!(out.state.n_components(), 1);
}
