//! Liapunov stability experiments for the ground state and the one-soliton.
//!
//! Distances:
//!
//! ```text
//! d_I [(u1,ξ1),(u2,ξ2)] = ‖(u1 - u2, ξ1 - ξ2)‖_{H1}
//! d_II[(u1,ξ1),(u2,ξ2)] = inf_τ ‖(τu1 - u2, ξ1 - ξ2)‖_{H1}
//! ```
//!
//! where `(τu)(x) = u(x + τ)`. For a soliton `φ` of speed `C` and a perturbed
//! state with `h = u - φ`, `ΔH = H(u,ξ) - H(φ,0)` is sandwiched between
//!
//! ```text
//! ΔH ≤ [max(1,C) + δ/(3√2)] ‖(h,ξ)‖²      (upper)
//! ΔH ≥ (1/6) min(1,C) d_II²               (lower)
//! ```
//!
//! and conservation of `H` turns the pair into a time-uniform bound on `d_II`.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CkdvError, Result};
use crate::grid::{Grid1D, RealField};
use crate::integrator::{evolve, Observer, SolverConfig};
use crate::invariants::{
    apriori, casimir_v, hamiltonian, sobolev_h1, sobolev_sq, AprioriCheck, AprioriData,
    Drifts, InvariantMonitor,
};
use crate::solitons::{soliton_profile, soliton_state, SolitonSpec};
use crate::state::{axpy_state, Components, CoupledState};

/// Which fields the translation group acts on in `d_II`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TranslationMode {
    /// Translate `u` only, leaving `ξ` in place.
    #[default]
    UOnly,
    /// Translate `u` and every Clifford component together.
    Both,
}

/// Which fields a random perturbation touches.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationMode {
    UOnly,
    XiOnly,
    #[default]
    Mixed,
}

impl std::str::FromStr for PerturbationMode {
    type Err = CkdvError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "u-only" => Ok(Self::UOnly),
            "xi-only" => Ok(Self::XiOnly),
            "mixed" => Ok(Self::Mixed),
            other => Err(CkdvError::InvalidParameter(format!(
                "unknown perturbation mode {other:?} (expected u-only, xi-only or mixed)"
            ))),
        }
    }
}

pub fn distance_d1(a: &CoupledState, b: &CoupledState) -> Result<f64> {
    sobolev_h1(a, Some(b))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuotientDistance {
    pub value: f64,
    /// Minimizing translation: `τ* u1(x) = u1(x + tau_star)`.
    pub tau_star: f64,
}

/// H1 objective `J(τ) = ‖(τu1 - u2, ξ1 - ξ2)‖²` evaluated in transform space.
struct ShiftObjective {
    moving: Vec<Vec<Complex64>>,
    fixed: Vec<Vec<Complex64>>,
    weights: Vec<f64>,
    wavenumbers: Vec<f64>,
    nyquist: usize,
    /// Squared norm of the untranslated difference.
    constant: f64,
}

impl ShiftObjective {
    fn new(a: &CoupledState, b: &CoupledState, mode: TranslationMode) -> Result<Self> {
        if a.n_components() != b.n_components() {
            return Err(CkdvError::ShapeMismatch(format!(
                "{} vs {} components",
                a.n_components(),
                b.n_components()
            )));
        }
        let grid = a.grid();
        grid.check_same(b.grid())?;
        let n = grid.n_points() as f64;
        let scale = grid.length() / (n * n);
        let weights = grid
            .wavenumbers()
            .iter()
            .map(|k| scale * (1.0 + k * k))
            .collect();
        let (moving, fixed, constant) = match mode {
            TranslationMode::Both => (
                a.all_fields().map(|f| f.spectrum()).collect(),
                b.all_fields().map(|f| f.spectrum()).collect(),
                0.0,
            ),
            TranslationMode::UOnly => {
                let constant = a
                    .phi()
                    .iter()
                    .zip(b.phi())
                    .map(|(p, q)| {
                        let d = p.sub(q).expect("same grid");
                        let dd = d.deriv(1).expect("order 1");
                        let sq = |f: &RealField| {
                            grid.spacing() * f.values().iter().map(|v| v * v).sum::<f64>()
                        };
                        sq(&d) + sq(&dd)
                    })
                    .sum();
                (vec![a.u().spectrum()], vec![b.u().spectrum()], constant)
            }
        };
        Ok(Self {
            moving,
            fixed,
            weights,
            wavenumbers: grid.wavenumbers().to_vec(),
            nyquist: grid.nyquist_index(),
            constant,
        })
    }

    fn eval(&self, tau: f64) -> f64 {
        let mut total = self.constant;
        for (a, b) in self.moving.iter().zip(&self.fixed) {
            for (m, ((am, bm), (&w, &k))) in a
                .iter()
                .zip(b)
                .zip(self.weights.iter().zip(&self.wavenumbers))
                .enumerate()
            {
                let shifted = if m == self.nyquist {
                    am * (k * tau).cos()
                } else {
                    am * Complex64::from_polar(1.0, k * tau)
                };
                total += w * (shifted - bm).norm_sqr();
            }
        }
        total
    }

    /// `J` at every grid shift `τ_j = j Δx`, through one inverse transform
    /// of the cross-spectrum.
    fn scan(&self, grid: &Grid1D) -> Vec<f64> {
        let n = grid.n_points();
        let mut base = self.constant;
        let mut cross = vec![Complex64::new(0.0, 0.0); n];
        for (a, b) in self.moving.iter().zip(&self.fixed) {
            for (m, (am, bm)) in a.iter().zip(b).enumerate() {
                let w = self.weights[m];
                base += w * (am.norm_sqr() + bm.norm_sqr());
                cross[m] += w * am * bm.conj();
            }
        }
        // Σ_m X_m e^{2πi m j / N} is N times the inverse DFT
        let correlation = grid.inverse(cross);
        correlation
            .iter()
            .map(|c| base - 2.0 * n as f64 * c)
            .collect()
    }
}

fn wrap_shift(tau: f64, length: f64) -> f64 {
    (tau + 0.5 * length).rem_euclid(length) - 0.5 * length
}

/// `d_II(a, b)` and the minimizing translation of `a`.
///
/// A scan over all grid shifts locates the basin; golden-section search over
/// one grid spacing on either side then refines with fractional shifts.
pub fn distance_d2(a: &CoupledState, b: &CoupledState, mode: TranslationMode) -> Result<QuotientDistance> {
    let objective = ShiftObjective::new(a, b, mode)?;
    let grid = a.grid();
    let dx = grid.spacing();
    let scan = objective.scan(grid);
    let j_best = scan
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(j, _)| j)
        .expect("grid is non-empty");
    let center = wrap_shift(j_best as f64 * dx, grid.length());

    let (mut lo, mut hi) = (center - dx, center + dx);
    let ratio = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (objective.eval(x1), objective.eval(x2));
    while hi - lo > 1e-14 * dx.max(center.abs()) {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = objective.eval(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = objective.eval(x2);
        }
    }

    let candidates = [
        (0.5 * (lo + hi), objective.eval(0.5 * (lo + hi))),
        (center, objective.eval(center)),
        (0.0, objective.eval(0.0)),
    ];
    let (tau_star, best) = candidates
        .into_iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("non-empty");
    Ok(QuotientDistance {
        value: best.max(0.0).sqrt(),
        tau_star,
    })
}

/// Shape of the random perturbations built by [`make_perturbation`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationShape {
    /// Width of the Gaussian envelope as a fraction of the domain length.
    pub envelope_fraction: f64,
    /// Largest carrier wavenumber before the envelope is applied.
    pub max_carrier_wavenumber: f64,
    /// Number of random carrier modes.
    pub carriers: usize,
}

impl Default for PerturbationShape {
    fn default() -> Self {
        Self {
            envelope_fraction: 0.0625,
            max_carrier_wavenumber: 0.15,
            carriers: 6,
        }
    }
}

fn random_bump(grid: &Grid1D, shape: &PerturbationShape, rng: &mut ChaCha8Rng) -> RealField {
    let sigma = shape.envelope_fraction * grid.length();
    let carriers: Vec<(f64, f64, f64)> = (0..shape.carriers)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..shape.max_carrier_wavenumber),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let center = rng.gen_range(-0.5..0.5) * sigma;
    let values: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&x| {
            let z = x - center;
            let envelope = (-0.5 * z * z / (sigma * sigma)).exp();
            envelope
                * carriers
                    .iter()
                    .map(|(amp, k, phase)| amp * (k * z + phase).cos())
                    .sum::<f64>()
        })
        .collect();
    // keep the lowest eighth of the modes
    let mut spec = grid.forward(&values);
    let cutoff = grid.n_points() / 16;
    for (m, c) in spec.iter_mut().enumerate() {
        let signed = if m <= grid.n_points() / 2 {
            m
        } else {
            grid.n_points() - m
        };
        if signed > cutoff {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    RealField::from_raw(grid, grid.inverse(spec))
}

/// Band-limited, boundary-decayed random increment with H1 norm `delta`,
/// determined entirely by `seed`.
pub fn make_perturbation(
    grid: &Grid1D,
    n_components: usize,
    delta: f64,
    seed: u64,
    mode: PerturbationMode,
) -> Result<CoupledState> {
    make_shaped_perturbation(grid, n_components, delta, seed, mode, &PerturbationShape::default())
}

pub fn make_shaped_perturbation(
    grid: &Grid1D,
    n_components: usize,
    delta: f64,
    seed: u64,
    mode: PerturbationMode,
    shape: &PerturbationShape,
) -> Result<CoupledState> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(CkdvError::InvalidParameter(format!(
            "perturbation size must be non-negative, got {delta}"
        )));
    }
    let zero = CoupledState::zeros(grid, n_components)?;
    if delta == 0.0 {
        return Ok(zero);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = match mode {
        PerturbationMode::UOnly | PerturbationMode::Mixed => random_bump(grid, shape, &mut rng),
        PerturbationMode::XiOnly => RealField::zeros(grid),
    };
    let phi = (0..n_components)
        .map(|_| match mode {
            PerturbationMode::XiOnly | PerturbationMode::Mixed => random_bump(grid, shape, &mut rng),
            PerturbationMode::UOnly => RealField::zeros(grid),
        })
        .collect();
    let raw = CoupledState::new(u, phi)?;
    let norm = sobolev_h1(&raw, None)?;
    if norm == 0.0 {
        return Err(CkdvError::DegenerateNormalization("random perturbation vanished"));
    }
    Ok(raw.scaled(delta / norm))
}

/// Scales every field so that `V` equals `v_target`.
pub fn rescale_to_v(state: &CoupledState, v_target: f64) -> Result<CoupledState> {
    let v = casimir_v(state);
    if v <= 0.0 {
        return Err(CkdvError::DegenerateNormalization("state has V = 0"));
    }
    if !(v_target.is_finite() && v_target >= 0.0) {
        return Err(CkdvError::InvalidParameter(format!(
            "target V must be non-negative, got {v_target}"
        )));
    }
    Ok(state.scaled((v_target / v).sqrt()))
}

/// One side of the ΔH sandwich evaluated at `t = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DhCheck {
    pub ok: bool,
    /// `ΔH` for the lower bound, `|ΔH|` for the upper bound.
    pub lhs: f64,
    pub rhs: f64,
    /// Distance from violation: `rhs - |ΔH|` (upper) or `ΔH - rhs` (lower).
    pub margin: f64,
}

/// `ΔH = H(perturbed) - H(φ)` and the rounding floor of that difference.
fn delta_h(spec: &SolitonSpec, perturbed: &CoupledState) -> Result<(f64, f64, CoupledState)> {
    let soliton = soliton_state(spec, perturbed.grid(), perturbed.n_components())?;
    let (hp, hs) = (hamiltonian(perturbed), hamiltonian(&soliton));
    // H is a sum of N terms; its difference cannot be resolved below this
    let floor = 1e3 * f64::EPSILON * (hp.abs() + hs.abs());
    Ok((hp - hs, floor, soliton))
}

pub fn upper_coefficient(speed: f64, delta: f64) -> f64 {
    speed.max(1.0) + delta / (3.0 * SQRT_2)
}

pub fn lower_coefficient(speed: f64) -> f64 {
    speed.min(1.0) / 6.0
}

/// `|ΔH| ≤ [max(1,C) + δ/(3√2)] ‖(h,ξ)‖²`.
pub fn check_dh_upper(spec: &SolitonSpec, perturbed: &CoupledState, delta: f64) -> Result<DhCheck> {
    let (dh, floor, soliton) = delta_h(spec, perturbed)?;
    let rhs = upper_coefficient(spec.speed, delta) * sobolev_sq(perturbed, Some(&soliton))?;
    let margin = rhs - dh.abs();
    Ok(DhCheck {
        ok: margin >= -floor,
        lhs: dh.abs(),
        rhs,
        margin,
    })
}

/// `ΔH ≥ (1/6) min(1,C) d_II²`.
pub fn check_dh_lower(spec: &SolitonSpec, perturbed: &CoupledState, mode: TranslationMode) -> Result<DhCheck> {
    let (dh, floor, soliton) = delta_h(spec, perturbed)?;
    let d2 = distance_d2(perturbed, &soliton, mode)?.value;
    let rhs = lower_coefficient(spec.speed) * d2 * d2;
    let margin = dh - rhs;
    Ok(DhCheck {
        ok: margin >= -floor,
        lhs: dh,
        rhs,
        margin,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilitySample {
    pub t: f64,
    pub d1: f64,
    pub d2: f64,
    pub tau_star: f64,
    pub sobolev: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityRunReport {
    pub seed: u64,
    /// Initial `d_I` between the perturbed state and the soliton.
    pub delta: f64,
    pub speed: f64,
    pub dh: f64,
    pub upper_coeff: f64,
    pub lower_coeff: f64,
    pub upper: DhCheck,
    pub lower: DhCheck,
    /// `√(6 ΔH / min(1,C))`.
    pub tracking_bound: f64,
    pub slack: f64,
    pub series: Vec<StabilitySample>,
    pub drifts: Option<Drifts>,
    pub ok_upper: bool,
    pub ok_lower: bool,
    pub ok_tracking: bool,
    /// `d_II ≤ d_I` at every sample.
    pub ok_metric: bool,
    /// Largest `sup|u| - ‖(u,ξ)‖/√2` over the samples.
    pub sup_excess: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolitonExperiment {
    pub speed: f64,
    pub delta: f64,
    pub seeds: Vec<u64>,
    pub mode: PerturbationMode,
    pub v_rescale: bool,
    pub translation: TranslationMode,
    pub n_components: usize,
    pub solver: SolverConfig,
}

/// Builds `φ + increment`, optionally moved back onto the soliton's `V` level.
pub fn perturbed_soliton(
    spec: &SolitonSpec,
    grid: &Grid1D,
    n_components: usize,
    delta: f64,
    seed: u64,
    mode: PerturbationMode,
    v_rescale: bool,
) -> Result<CoupledState> {
    let soliton = soliton_state(spec, grid, n_components)?;
    let increment = make_perturbation(grid, n_components, delta, seed, mode)?;
    let perturbed = axpy_state(1.0, &increment, &soliton)?;
    if v_rescale && delta > 0.0 {
        rescale_to_v(&perturbed, casimir_v(&soliton))
    } else {
        Ok(perturbed)
    }
}

struct TrackingObserver {
    spec: SolitonSpec,
    n_components: usize,
    mode: TranslationMode,
    samples: Vec<StabilitySample>,
}

impl Observer for TrackingObserver {
    fn observe(&mut self, t: f64, state: &CoupledState) -> Result<()> {
        let grid = state.grid();
        let reference = CoupledState::new(
            soliton_profile(&self.spec, grid, t)?,
            vec![RealField::zeros(grid); self.n_components],
        )?;
        let d2 = distance_d2(state, &reference, self.mode)?;
        self.samples.push(StabilitySample {
            t,
            d1: distance_d1(state, &reference)?,
            d2: d2.value,
            tau_star: d2.tau_star,
            sobolev: sobolev_h1(state, None)?,
        });
        Ok(())
    }
}

fn soliton_run(grid: &Grid1D, exp: &SolitonExperiment, seed: u64) -> Result<StabilityRunReport> {
    let spec = SolitonSpec::new(exp.speed, 0.0)?;
    let nc = exp.n_components;
    let perturbed = perturbed_soliton(&spec, grid, nc, exp.delta, seed, exp.mode, exp.v_rescale)?;
    let soliton = soliton_state(&spec, grid, nc)?;
    let delta = distance_d1(&perturbed, &soliton)?;
    let upper = check_dh_upper(&spec, &perturbed, delta)?;
    let lower = check_dh_lower(&spec, &perturbed, exp.translation)?;
    let dh = hamiltonian(&perturbed) - hamiltonian(&soliton);
    let l = spec.speed.min(1.0);
    let tracking_bound = (6.0 * dh.max(0.0) / l).sqrt();

    let mut tracker = TrackingObserver {
        spec,
        n_components: nc,
        mode: exp.translation,
        samples: Vec::new(),
    };
    let mut monitor = InvariantMonitor::new();
    evolve(&perturbed, &exp.solver, &mut [&mut tracker, &mut monitor])?;

    let (h0, v0) = (monitor.records[0].h, monitor.records[0].v);
    let drift = monitor
        .records
        .iter()
        .map(|r| (r.h - h0).abs() + (r.v - v0).abs())
        .fold(0.0, f64::max);
    let slack = 1e-6 + 10.0 * drift;
    let ok_tracking = tracker
        .samples
        .iter()
        .all(|s| s.d2 <= tracking_bound + slack);
    let ok_metric = tracker.samples.iter().all(|s| s.d2 <= s.d1);

    Ok(StabilityRunReport {
        seed,
        delta,
        speed: spec.speed,
        dh,
        upper_coeff: upper_coefficient(spec.speed, delta),
        lower_coeff: lower_coefficient(spec.speed),
        ok_upper: upper.ok,
        ok_lower: lower.ok,
        upper,
        lower,
        tracking_bound,
        slack,
        series: tracker.samples,
        drifts: monitor.drifts(),
        ok_tracking,
        ok_metric,
        sup_excess: monitor.worst_sup_excess(),
    })
}

/// Runs every seed (in parallel) and returns the reports in seed order.
pub fn run_soliton_stability(grid: &Grid1D, exp: &SolitonExperiment) -> Result<Vec<StabilityRunReport>> {
    exp.seeds
        .par_iter()
        .map(|&seed| soliton_run(grid, exp, seed))
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroundExperiment {
    pub delta: f64,
    pub seeds: Vec<u64>,
    pub mode: PerturbationMode,
    pub n_components: usize,
    pub solver: SolverConfig,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroundRunReport {
    pub seed: u64,
    pub delta: f64,
    pub apriori: AprioriData,
    pub check: AprioriCheck,
    /// `(t, ‖(u,ξ)‖_{H1})`.
    pub series: Vec<(f64, f64)>,
    pub drifts: Option<Drifts>,
    /// Largest `sup|u| - ‖(u,ξ)‖/√2` over the run.
    pub sup_excess: f64,
    pub max_abs: f64,
}

fn ground_run(grid: &Grid1D, exp: &GroundExperiment, seed: u64) -> Result<GroundRunReport> {
    let initial = make_perturbation(grid, exp.n_components, exp.delta, seed, exp.mode)?;
    let bound = apriori(&initial)?;
    let mut monitor = InvariantMonitor::new();
    let mut max_abs = 0.0_f64;
    let mut peak = |_t: f64, s: &CoupledState| -> Result<()> {
        max_abs = max_abs.max(s.max_abs());
        Ok(())
    };
    evolve(&initial, &exp.solver, &mut [&mut monitor, &mut peak])?;
    Ok(GroundRunReport {
        seed,
        delta: exp.delta,
        apriori: bound,
        check: monitor.check_apriori()?,
        series: monitor.records.iter().map(|r| (r.t, r.sobolev())).collect(),
        drifts: monitor.drifts(),
        sup_excess: monitor.worst_sup_excess(),
        max_abs,
    })
}

pub fn run_ground_state_stability(grid: &Grid1D, exp: &GroundExperiment) -> Result<Vec<GroundRunReport>> {
    exp.seeds
        .par_iter()
        .map(|&seed| ground_run(grid, exp, seed))
        .collect()
}
