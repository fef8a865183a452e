//! Integrating-factor RK4 time stepping.
//!
//! The dispersive term `-∂³` of every field is applied exactly as the
//! phase `e^{i k³ dt}` in transform space; the remaining quadratic terms
//! are advanced with classical RK4 in the rotated variables.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::NonlinearKernel;
use crate::error::{CkdvError, Result};
use crate::grid::{Grid1D, RealField};
use crate::state::{Components, CoupledState};

/// Any sample with a magnitude above this aborts the run.
pub const BLOWUP_THRESHOLD: f64 = 1e8;

/// Advective Courant number used by [`suggest_dt`].
pub const CFL_NUMBER: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Time step. Negative values integrate backwards in time.
    pub dt: f64,
    /// Length of the integration interval (non-negative).
    pub t_end: f64,
    /// Steps between observer calls.
    pub sample_every: usize,
    pub dealias: bool,
    /// Skip the [`suggest_dt`] ceiling check.
    pub allow_large_dt: bool,
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            sample_every: 1,
            dealias: true,
            allow_large_dt: false,
        }
    }

    pub fn with_sample_every(mut self, sample_every: usize) -> Self {
        self.sample_every = sample_every;
        self
    }

    pub fn allowing_large_dt(mut self) -> Self {
        self.allow_large_dt = true;
        self
    }

    /// Number of steps covering `t_end`.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.dt.is_finite() && self.dt != 0.0) {
            return Err(CkdvError::InvalidParameter(format!(
                "dt must be finite and non-zero, got {}",
                self.dt
            )));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(CkdvError::InvalidParameter(format!(
                "t_end must be finite and non-negative, got {}",
                self.t_end
            )));
        }
        if self.sample_every == 0 {
            return Err(CkdvError::InvalidParameter("sample_every must be at least 1".into()));
        }
        if self.t_end == 0.0 {
            return Ok(0);
        }
        let h = self.dt.abs();
        if self.t_end < h {
            return Err(CkdvError::InvalidParameter(format!(
                "t_end = {} is shorter than one step {h}",
                self.t_end
            )));
        }
        let steps = (self.t_end / h).round();
        if (steps * h - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(CkdvError::InvalidParameter(format!(
                "t_end = {} is not a whole number of steps of {h}",
                self.t_end
            )));
        }
        Ok(steps as usize)
    }

    /// Validates the configuration against an initial state.
    pub fn validate(&self, state: &CoupledState) -> Result<usize> {
        let steps = self.n_steps()?;
        if !self.allow_large_dt {
            let ceiling = suggest_dt(state.grid(), state);
            if self.dt.abs() > ceiling {
                return Err(CkdvError::TimeStepTooLarge {
                    dt: self.dt.abs(),
                    ceiling,
                });
            }
        }
        Ok(steps)
    }
}

/// Advective CFL step `c Δx / max(1, sup|u|)`.
pub fn suggest_dt(grid: &Grid1D, state: &CoupledState) -> f64 {
    CFL_NUMBER * grid.spacing() / state.u().max_abs().max(1.0)
}

/// Receives `(t, state)` at every sample.
pub trait Observer {
    fn observe(&mut self, t: f64, state: &CoupledState) -> Result<()>;
}

impl<F> Observer for F
where
    F: FnMut(f64, &CoupledState) -> Result<()>,
{
    fn observe(&mut self, t: f64, state: &CoupledState) -> Result<()> {
        self(t, state)
    }
}

/// Keeps a copy of every sampled state.
#[derive(Default, Debug, Clone)]
pub struct SnapshotRecorder {
    pub snapshots: Vec<(f64, CoupledState)>,
}

impl Observer for SnapshotRecorder {
    fn observe(&mut self, t: f64, state: &CoupledState) -> Result<()> {
        self.snapshots.push((t, state.clone()));
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub state: CoupledState,
    pub times: Vec<f64>,
    pub steps: usize,
}

struct Stepper {
    grid: Grid1D,
    dt: f64,
    full: Vec<Complex64>,
    half: Vec<Complex64>,
    kernel: NonlinearKernel,
    stage: Vec<Vec<Complex64>>,
    k: [Vec<Vec<Complex64>>; 4],
}

impl Stepper {
    fn new(grid: &Grid1D, n_components: usize, dt: f64, dealias: bool) -> Self {
        let third = grid.derivative_symbol(3).expect("order 3");
        // u_t = -u''' has symbol -(ik)³
        let full = third.iter().map(|d| (-d * dt).exp()).collect();
        let half = third.iter().map(|d| (-d * 0.5 * dt).exp()).collect();
        let zeros = vec![vec![Complex64::new(0.0, 0.0); grid.n_points()]; n_components + 1];
        Self {
            grid: grid.clone(),
            dt,
            full,
            half,
            kernel: NonlinearKernel::new(grid, n_components, dealias),
            stage: zeros.clone(),
            k: [zeros.clone(), zeros.clone(), zeros.clone(), zeros],
        }
    }

    /// Advances `v` in place; returns the peak magnitude of the incoming state.
    fn advance(&mut self, v: &mut [Vec<Complex64>]) -> f64 {
        let dt = self.dt;
        let [a, b, c, d] = &mut self.k;
        let peak = self.kernel.eval(v, a);

        for ((s, vf), af) in self.stage.iter_mut().zip(v.iter()).zip(a.iter()) {
            for (((sm, vm), am), e2) in s.iter_mut().zip(vf).zip(af).zip(&self.half) {
                *sm = e2 * (vm + 0.5 * dt * am);
            }
        }
        self.kernel.eval(&self.stage, b);

        for ((s, vf), bf) in self.stage.iter_mut().zip(v.iter()).zip(b.iter()) {
            for (((sm, vm), bm), e2) in s.iter_mut().zip(vf).zip(bf).zip(&self.half) {
                *sm = e2 * vm + 0.5 * dt * bm;
            }
        }
        self.kernel.eval(&self.stage, c);

        for ((s, vf), cf) in self.stage.iter_mut().zip(v.iter()).zip(c.iter()) {
            for ((((sm, vm), cm), e), e2) in
                s.iter_mut().zip(vf).zip(cf).zip(&self.full).zip(&self.half)
            {
                *sm = e * vm + dt * e2 * cm;
            }
        }
        self.kernel.eval(&self.stage, d);

        let w = dt / 6.0;
        for (field, (((af, bf), cf), df)) in v
            .iter_mut()
            .zip(a.iter().zip(b.iter()).zip(c.iter()).zip(d.iter()))
        {
            for (m, vm) in field.iter_mut().enumerate() {
                let e = self.full[m];
                let e2 = self.half[m];
                *vm = e * *vm + w * (e * af[m] + 2.0 * e2 * (bf[m] + cf[m]) + df[m]);
            }
        }
        peak
    }

    fn to_state(&self, v: &[Vec<Complex64>]) -> CoupledState {
        let mut fields = v
            .iter()
            .map(|spec| RealField::from_spectrum(&self.grid, spec.clone()));
        let u = fields.next().expect("u");
        CoupledState::from_parts_unchecked(u, fields.collect())
    }
}

fn to_spectral(state: &CoupledState) -> Vec<Vec<Complex64>> {
    state.all_fields().map(|f| f.spectrum()).collect()
}

fn check_peak(peak: f64, t: f64, step: usize) -> Result<()> {
    if peak.is_finite() && peak <= BLOWUP_THRESHOLD {
        Ok(())
    } else {
        Err(CkdvError::BlowUp { t, step })
    }
}

/// One integrating-factor RK4 step of size `dt`.
pub fn step(state: &CoupledState, dt: f64) -> Result<CoupledState> {
    if !(dt.is_finite() && dt != 0.0) {
        return Err(CkdvError::InvalidParameter(format!(
            "dt must be finite and non-zero, got {dt}"
        )));
    }
    let mut stepper = Stepper::new(state.grid(), state.n_components(), dt, true);
    let mut v = to_spectral(state);
    let peak = stepper.advance(&mut v);
    check_peak(peak, 0.0, 0)?;
    let out = stepper.to_state(&v);
    check_peak(out.max_abs(), dt, 1)?;
    Ok(out)
}

/// Integrates `state` over `cfg.t_end`, calling every observer at `t = 0`,
/// every `cfg.sample_every` steps, and at the final time.
pub fn evolve(
    state: &CoupledState,
    cfg: &SolverConfig,
    observers: &mut [&mut dyn Observer],
) -> Result<Evolution> {
    let n_steps = cfg.validate(state)?;
    let mut times = Vec::new();
    let mut notify = |t: f64, s: &CoupledState, times: &mut Vec<f64>| -> Result<()> {
        times.push(t);
        for obs in observers.iter_mut() {
            obs.observe(t, s)?;
        }
        Ok(())
    };

    notify(0.0, state, &mut times)?;
    let mut stepper = Stepper::new(state.grid(), state.n_components(), cfg.dt, cfg.dealias);
    let mut v = to_spectral(state);
    let mut current = state.clone();
    for n in 1..=n_steps {
        let peak = stepper.advance(&mut v);
        check_peak(peak, (n - 1) as f64 * cfg.dt, n - 1)?;
        if n % cfg.sample_every == 0 || n == n_steps {
            let t = n as f64 * cfg.dt;
            current = stepper.to_state(&v);
            check_peak(current.max_abs(), t, n)?;
            notify(t, &current, &mut times)?;
        }
    }
    Ok(Evolution {
        state: current,
        times,
        steps: n_steps,
    })
}

/// Errors of a dt-halving sequence against a fine-step reference solution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TemporalStudy {
    pub t_end: f64,
    pub reference_dt: f64,
    pub dts: Vec<f64>,
    /// Max-norm distance to the reference over every field.
    pub errors: Vec<f64>,
    /// `log2(e_k / e_{k+1})` for consecutive entries.
    pub orders: Vec<f64>,
}

fn final_state(state: &CoupledState, dt: f64, t_end: f64) -> Result<CoupledState> {
    let cfg = SolverConfig::new(dt, t_end)
        .with_sample_every(usize::MAX)
        .allowing_large_dt();
    Ok(evolve(state, &cfg, &mut [])?.state)
}

fn state_distance(a: &CoupledState, b: &CoupledState) -> f64 {
    a.all_fields()
        .zip(b.all_fields())
        .map(|(x, y)| crate::grid::max_abs_diff(x.values(), y.values()))
        .fold(0.0, f64::max)
}

/// Runs `state` to `t_end` with each of `dts` and compares against a run
/// with `reference_dt`, which should be several halvings finer. Measuring
/// against a discrete reference keeps the spatial error out of the ratios.
pub fn temporal_convergence(
    state: &CoupledState,
    t_end: f64,
    dts: &[f64],
    reference_dt: f64,
) -> Result<TemporalStudy> {
    let reference = final_state(state, reference_dt, t_end)?;
    let errors = dts
        .iter()
        .map(|&dt| Ok(state_distance(&final_state(state, dt, t_end)?, &reference)))
        .collect::<Result<Vec<_>>>()?;
    let orders = errors
        .windows(2)
        .zip(dts.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect();
    Ok(TemporalStudy {
        t_end,
        reference_dt,
        dts: dts.to_vec(),
        errors,
        orders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::max_abs_diff;
    use std::f64::consts::PI;

    #[test]
    fn zero_state_stays_zero() {
        let g = Grid1D::new(2.0 * PI, 32).unwrap();
        let s = CoupledState::zeros(&g, 2).unwrap();
        assert_eq!(step(&s, 0.01).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn small_mode_follows_airy_phase() {
        let g = Grid1D::new(2.0 * PI, 32).unwrap();
        let eps = 1e-8;
        let dt = 0.01;
        let u = RealField::from_fn(&g, |x| eps * x.sin()).unwrap();
        let s = CoupledState::new(u, vec![RealField::zeros(&g)]).unwrap();
        let next = step(&s, dt).unwrap();
        // sin(x) under u_t = -u''' becomes sin(x + dt)
        let expect: Vec<f64> = g.nodes().iter().map(|x| eps * (x + dt).sin()).collect();
        assert!(max_abs_diff(next.u().values(), &expect) < 1e-12);
    }

    #[test]
    fn suggest_dt_examples() {
        let g = Grid1D::new(8.0, 32).unwrap();
        let zero = CoupledState::zeros(&g, 1).unwrap();
        assert_eq!(suggest_dt(&g, &zero), 0.125);
        let fine = Grid1D::new(8.0, 64).unwrap();
        let zero_fine = CoupledState::zeros(&fine, 1).unwrap();
        assert_eq!(suggest_dt(&fine, &zero_fine), 0.0625);
    }

    #[test]
    fn step_counts() {
        assert_eq!(SolverConfig::new(0.1, 1.0).n_steps().unwrap(), 10);
        assert_eq!(SolverConfig::new(-0.1, 1.0).n_steps().unwrap(), 10);
        assert_eq!(SolverConfig::new(0.1, 0.0).n_steps().unwrap(), 0);
        assert!(SolverConfig::new(0.3, 1.0).n_steps().is_err());
        assert!(SolverConfig::new(0.3, 0.1).n_steps().is_err());
        assert!(SolverConfig::new(0.0, 1.0).n_steps().is_err());
        assert!(SolverConfig::new(0.1, 1.0).with_sample_every(0).n_steps().is_err());
    }

    #[test]
    fn zero_length_run_samples_once() {
        let g = Grid1D::new(2.0 * PI, 16).unwrap();
        let s = CoupledState::zeros(&g, 1).unwrap();
        let mut rec = SnapshotRecorder::default();
        let out = evolve(&s, &SolverConfig::new(0.01, 0.0), &mut [&mut rec]).unwrap();
        assert_eq!(out.times, vec![0.0]);
        assert_eq!(rec.snapshots.len(), 1);
        assert_eq!(out.state, s);
    }

    #[test]
    fn sampling_includes_final_time() {
        let g = Grid1D::new(2.0 * PI, 16).unwrap();
        let s = CoupledState::zeros(&g, 1).unwrap();
        let cfg = SolverConfig::new(0.01, 0.05).with_sample_every(2);
        let out = evolve(&s, &cfg, &mut []).unwrap();
        let expect = [0.0, 0.02, 0.04, 0.05];
        assert_eq!(out.times.len(), expect.len());
        for (a, b) in out.times.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn oversized_step_is_rejected_unless_allowed() {
        let g = Grid1D::new(2.0 * PI, 16).unwrap();
        let s = CoupledState::zeros(&g, 1).unwrap();
        let cfg = SolverConfig::new(1.0, 1.0);
        assert!(matches!(
            evolve(&s, &cfg, &mut []),
            Err(CkdvError::TimeStepTooLarge { .. })
        ));
        assert!(evolve(&s, &cfg.allowing_large_dt(), &mut []).is_ok());
    }
}
