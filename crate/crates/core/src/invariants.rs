//! Conserved quantities, the Sobolev norm, and the a-priori norm bound.
//!
//! | quantity | density |
//! |----------|---------|
//! | `H`      | `-u³/3 - u P/2 + u'² + Σ φ_i'²` |
//! | `V`      | `u² + P` |
//! | `H1`     | `u` |
//! | `H½_i`   | `φ_i` |
//! | `M_ij`   | `φ_i(x) ∫_{-∞}^x φ_j` |
//!
//! with `P = Σ φ_i²`. The squared norm is `∫ u² + Σφ_i² + u'² + Σφ_i'²`.

use std::f64::consts::SQRT_2;

use serde::Serialize;

use crate::error::{CkdvError, Result};
use crate::grid::{RealField, DEFAULT_DECAY_TOLERANCE};
use crate::integrator::Observer;
use crate::state::{Components, CoupledState};

fn d1(f: &RealField) -> RealField {
    f.deriv(1).expect("order 1")
}

fn sum_sq(f: &RealField) -> f64 {
    f.grid().spacing() * f.values().iter().map(|v| v * v).sum::<f64>()
}

fn l1(f: &RealField) -> f64 {
    f.grid().spacing() * f.values().iter().map(|v| v.abs()).sum::<f64>()
}

pub fn hamiltonian(state: &CoupledState) -> f64 {
    let grid = state.grid();
    let u = state.u().values();
    let body = state.p_body();
    let cubic: f64 = u
        .iter()
        .zip(body.values())
        .map(|(u, p)| -u * u * u / 3.0 - 0.5 * u * p)
        .sum::<f64>()
        * grid.spacing();
    let gradient: f64 = state.all_fields().map(|f| sum_sq(&d1(f))).sum();
    cubic + gradient
}

/// `V = ∫ (u² + P) dx`.
pub fn casimir_v(state: &CoupledState) -> f64 {
    state.all_fields().map(sum_sq).sum()
}

/// `(∫u, [∫φ_1, ..., ∫φ_Nc])`.
pub fn masses(state: &CoupledState) -> (f64, Vec<f64>) {
    (
        state.u().integrate(),
        state.phi().iter().map(RealField::integrate).collect(),
    )
}

/// `M_ij = ∫ φ_i(x) ∫_{-∞}^x φ_j(s) ds dx`, row `i`, column `j`.
pub fn nonlocal_matrix(state: &CoupledState) -> Result<Vec<Vec<f64>>> {
    nonlocal_matrix_with_tolerance(state, DEFAULT_DECAY_TOLERANCE)
}

/// [`nonlocal_matrix`] with an explicit edge-decay tolerance.
pub fn nonlocal_matrix_with_tolerance(state: &CoupledState, tolerance: f64) -> Result<Vec<Vec<f64>>> {
    let primitives = state
        .phi()
        .iter()
        .map(|f| f.antiderivative_with_tolerance(tolerance))
        .collect::<Result<Vec<_>>>()?;
    Ok(state
        .phi()
        .iter()
        .map(|phi_i| {
            primitives
                .iter()
                .map(|big_f| phi_i.mul(big_f).expect("same grid").integrate())
                .collect()
        })
        .collect())
}

/// Squared H1 norm of `a - b` (or of `a` when `b` is `None`).
pub fn sobolev_sq(a: &CoupledState, b: Option<&CoupledState>) -> Result<f64> {
    let diff;
    let target = match b {
        Some(b) => {
            diff = a.sub(b)?;
            &diff
        }
        None => a,
    };
    Ok(target
        .all_fields()
        .map(|f| sum_sq(f) + sum_sq(&d1(f)))
        .sum())
}

/// `‖(u_a - u_b, ξ_a - ξ_b)‖_{H1}`.
pub fn sobolev_h1(a: &CoupledState, b: Option<&CoupledState>) -> Result<f64> {
    Ok(sobolev_sq(a, b)?.sqrt())
}

/// `sup|u|` and the right side `‖(u,ξ)‖_{H1} / √2` of the sup-norm inequality.
pub fn sup_norm_inequality(state: &CoupledState) -> (f64, f64) {
    let norm = sobolev_sq(state, None).expect("no second state").sqrt();
    (state.u().max_abs(), norm / SQRT_2)
}

/// Inputs and value of the time-uniform H1 bound `(d + √(d² + 4e)) / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AprioriData {
    pub d: f64,
    pub e: f64,
    pub bound: f64,
}

impl AprioriData {
    pub fn from_invariants(v: f64, h: f64) -> Result<Self> {
        let d = v / (2.0 * SQRT_2);
        let e = v + h;
        let disc = d * d + 4.0 * e;
        if disc < 0.0 {
            return Err(CkdvError::NegativeDiscriminant(disc));
        }
        Ok(Self {
            d,
            e,
            bound: 0.5 * (d + disc.sqrt()),
        })
    }
}

pub fn apriori(state0: &CoupledState) -> Result<AprioriData> {
    AprioriData::from_invariants(casimir_v(state0), hamiltonian(state0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantReport {
    pub t: f64,
    pub h: f64,
    pub v: f64,
    pub h1: f64,
    pub h_half: Vec<f64>,
    /// `None` when some component has not decayed at the left edge.
    pub m: Option<Vec<Vec<f64>>>,
    pub sobolev_sq: f64,
    pub apriori_bound: f64,
    pub sup_u: f64,
    /// `∫|u|`, the natural size of `H1`.
    pub u_l1: f64,
    /// `∫|φ_i|`, the natural size of `H½_i`.
    pub phi_l1: Vec<f64>,
}

impl InvariantReport {
    pub fn compute(t: f64, state: &CoupledState, apriori_bound: f64) -> Self {
        let (h1, h_half) = masses(state);
        Self {
            t,
            h: hamiltonian(state),
            v: casimir_v(state),
            h1,
            h_half,
            m: nonlocal_matrix(state).ok(),
            sobolev_sq: sobolev_sq(state, None).expect("no second state"),
            apriori_bound,
            sup_u: state.u().max_abs(),
            u_l1: l1(state.u()),
            phi_l1: state.phi().iter().map(l1).collect(),
        }
    }

    pub fn sobolev(&self) -> f64 {
        self.sobolev_sq.sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AprioriCheck {
    pub ok: bool,
    pub worst_margin: f64,
    pub worst_t: f64,
}

/// Compares the sampled norms against `bound`.
pub fn check_apriori(records: &[InvariantReport], bound: &AprioriData) -> Result<AprioriCheck> {
    let (worst_margin, worst_t) = records
        .iter()
        .map(|r| (bound.bound - r.sobolev(), r.t))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| CkdvError::InvalidParameter("no invariant records to check".into()))?;
    Ok(AprioriCheck {
        ok: worst_margin >= 0.0,
        worst_margin,
        worst_t,
    })
}

/// Observer collecting an [`InvariantReport`] per sample. The a-priori bound
/// is fixed from the first sample.
#[derive(Default, Debug, Clone)]
pub struct InvariantMonitor {
    pub apriori: Option<AprioriData>,
    pub records: Vec<InvariantReport>,
}

impl InvariantMonitor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn drifts(&self) -> Option<Drifts> {
        Drifts::from_records(&self.records)
    }

    pub fn check_apriori(&self) -> Result<AprioriCheck> {
        let bound = self
            .apriori
            .ok_or_else(|| CkdvError::InvalidParameter("monitor has no samples".into()))?;
        check_apriori(&self.records, &bound)
    }

    /// Largest `sup|u| - ‖(u,ξ)‖/√2` over the samples (non-positive when the
    /// sup-norm inequality holds everywhere).
    pub fn worst_sup_excess(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.sup_u - r.sobolev() / SQRT_2)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Observer for InvariantMonitor {
    fn observe(&mut self, t: f64, state: &CoupledState) -> Result<()> {
        let bound = match self.apriori {
            Some(a) => a,
            None => {
                let a = apriori(state)?;
                self.apriori = Some(a);
                a
            }
        };
        self.records
            .push(InvariantReport::compute(t, state, bound.bound));
        Ok(())
    }
}

/// Fraction of its initial value by which `q` moved. Quantities that start
/// out much smaller than their natural magnitude `scale` are measured
/// against a thousandth of that magnitude instead.
pub fn relative_drift(q0: f64, q: f64, scale: f64) -> f64 {
    let denom = q0.abs().max(1e-3 * scale.abs());
    if denom == 0.0 {
        (q - q0).abs()
    } else {
        (q - q0).abs() / denom
    }
}

/// Largest relative drift of each monitored quantity over a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Drifts {
    pub h: f64,
    pub v: f64,
    pub h1: f64,
    pub h_half_max: f64,
    /// `None` when the non-local matrix was unavailable at some sample.
    pub m_max: Option<f64>,
}

impl Drifts {
    pub fn from_records(records: &[InvariantReport]) -> Option<Self> {
        let first = records.first()?;
        let worst = |f: &dyn Fn(&InvariantReport) -> f64| {
            records.iter().map(f).fold(0.0_f64, f64::max)
        };
        let h_scale = first.h.abs();
        let h = worst(&|r| relative_drift(first.h, r.h, h_scale));
        let v = worst(&|r| relative_drift(first.v, r.v, first.v));
        let h1 = worst(&|r| relative_drift(first.h1, r.h1, first.u_l1));
        let h_half_max = worst(&|r| {
            r.h_half
                .iter()
                .zip(&first.h_half)
                .zip(&first.phi_l1)
                .map(|((q, q0), scale)| relative_drift(*q0, *q, *scale))
                .fold(0.0, f64::max)
        });
        let m_max = first.m.as_ref().and_then(|m0| {
            let scale = m0.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()));
            records
                .iter()
                .map(|r| {
                    r.m.as_ref().map(|m| {
                        m.iter()
                            .flatten()
                            .zip(m0.iter().flatten())
                            .map(|(q, q0)| relative_drift(*q0, *q, scale))
                            .fold(0.0, f64::max)
                    })
                })
                .try_fold(0.0_f64, |acc, d| d.map(|d| acc.max(d)))
        });
        Some(Self {
            h,
            v,
            h1,
            h_half_max,
            m_max,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1D;
    use std::f64::consts::PI;

    fn grid_2pi() -> Grid1D {
        Grid1D::new(2.0 * PI, 32).unwrap()
    }

    fn pure_clifford(phi: &[&dyn Fn(f64) -> f64], grid: &Grid1D) -> CoupledState {
        CoupledState::new(
            RealField::zeros(grid),
            phi.iter()
                .map(|f| RealField::from_fn(grid, f).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_state_invariants() {
        let s = CoupledState::zeros(&grid_2pi(), 2).unwrap();
        assert_eq!(hamiltonian(&s), 0.0);
        assert_eq!(casimir_v(&s), 0.0);
        assert_eq!(masses(&s), (0.0, vec![0.0, 0.0]));
        assert_eq!(sobolev_h1(&s, None).unwrap(), 0.0);
        let a = apriori(&s).unwrap();
        assert_eq!((a.d, a.e, a.bound), (0.0, 0.0, 0.0));
    }

    #[test]
    fn trig_invariants() {
        let g = grid_2pi();
        let s = pure_clifford(&[&f64::sin], &g);
        assert!((hamiltonian(&s) - PI).abs() < 1e-12);
        assert!(masses(&s).1[0].abs() < 1e-14);

        let s = pure_clifford(&[&f64::sin, &f64::sin], &g);
        assert!((casimir_v(&s) - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn nonlocal_matrix_of_zero_state() {
        let g = Grid1D::new(40.0 * PI, 64).unwrap();
        let s = CoupledState::zeros(&g, 3).unwrap();
        let m = nonlocal_matrix(&s).unwrap();
        assert!(m.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn nonlocal_diagonal_identity() {
        let g = Grid1D::new(40.0 * PI, 512).unwrap();
        let gauss = |c: f64, w: f64| move |x: f64| (-(x - c) * (x - c) / (w * w)).exp();
        let (a, b) = (gauss(1.0, 1.5), gauss(-1.0, 2.0));
        let s = pure_clifford(&[&a, &b], &g);
        let m = nonlocal_matrix(&s).unwrap();
        let (_, h_half) = masses(&s);
        for i in 0..2 {
            let expect = 0.5 * h_half[i] * h_half[i];
            assert!((m[i][i] - expect).abs() < 1e-8 * expect, "{} vs {expect}", m[i][i]);
        }
        assert!((m[0][1] - m[1][0]).abs() > 1e-3);
    }

    #[test]
    fn nonlocal_matrix_needs_decay() {
        let g = Grid1D::new(2.0 * PI, 32).unwrap();
        let s = pure_clifford(&[&f64::cos], &g);
        assert!(matches!(
            nonlocal_matrix(&s),
            Err(CkdvError::DecayViolation { .. })
        ));
    }

    #[test]
    fn sobolev_of_identical_states_is_zero() {
        let s = pure_clifford(&[&f64::sin], &grid_2pi());
        assert_eq!(sobolev_h1(&s, Some(&s)).unwrap(), 0.0);
        let other = CoupledState::zeros(&Grid1D::new(2.0 * PI, 16).unwrap(), 1).unwrap();
        assert_eq!(sobolev_h1(&s, Some(&other)), Err(CkdvError::GridMismatch));
    }

    #[test]
    fn apriori_rejects_negative_discriminant() {
        assert!(matches!(
            AprioriData::from_invariants(0.0, -1.0),
            Err(CkdvError::NegativeDiscriminant(_))
        ));
    }

    #[test]
    fn check_apriori_examples() {
        let s = CoupledState::zeros(&grid_2pi(), 1).unwrap();
        let a = apriori(&s).unwrap();
        let rec = InvariantReport::compute(0.0, &s, a.bound);
        let check = check_apriori(std::slice::from_ref(&rec), &a).unwrap();
        assert!(check.ok);
        assert_eq!(check.worst_margin, 0.0);

        let mut bad = rec;
        bad.t = 3.0;
        bad.sobolev_sq = 1.0;
        let check = check_apriori(&[bad], &a).unwrap();
        assert!(!check.ok);
        assert_eq!(check.worst_t, 3.0);
        assert!(check_apriori(&[], &a).is_err());
    }

    #[test]
    fn relative_drift_floors_small_quantities() {
        assert_eq!(relative_drift(2.0, 2.0, 2.0), 0.0);
        assert!((relative_drift(2.0, 2.2, 2.0) - 0.1).abs() < 1e-12);
        assert!((relative_drift(0.0, 1e-6, 1.0) - 1e-3).abs() < 1e-15);
        assert_eq!(relative_drift(0.0, 0.0, 0.0), 0.0);
    }
}
