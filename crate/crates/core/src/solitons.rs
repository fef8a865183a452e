//! One-soliton solutions `u = φ(x - Ct)`, `ξ = 0`, where `φ` is the decaying
//! solution of `φ'' + φ²/2 = Cφ`:
//!
//! ```text
//! φ(x) = 3C sech²(√C x / 2)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{CkdvError, Result};
use crate::grid::{max_abs_diff, Grid1D, RealField};
use crate::integrator::{evolve, SolverConfig};
use crate::state::CoupledState;

/// Largest admissible profile value at the domain edge.
pub const DOMAIN_FIT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolitonSpec {
    /// Wave speed; the peak height is `3C`.
    pub speed: f64,
    /// Center at `t = 0`.
    pub x0: f64,
}

impl SolitonSpec {
    pub fn new(speed: f64, x0: f64) -> Result<Self> {
        if !(speed.is_finite() && speed > 0.0) {
            return Err(CkdvError::InvalidParameter(format!(
                "soliton speed must be positive, got {speed}"
            )));
        }
        if !x0.is_finite() {
            return Err(CkdvError::InvalidParameter("soliton center must be finite".into()));
        }
        Ok(Self { speed, x0 })
    }

    pub fn peak(&self) -> f64 {
        3.0 * self.speed
    }

    pub fn width_scale(&self) -> f64 {
        2.0 / self.speed.sqrt()
    }

    /// Closed-form profile at distance `z` from the crest.
    pub fn value_at(&self, z: f64) -> f64 {
        let c = self.speed;
        3.0 * c / (0.5 * c.sqrt() * z).cosh().powi(2)
    }

    /// Profile value half a domain away from the crest.
    pub fn boundary_value(&self, grid: &Grid1D) -> f64 {
        self.value_at(0.5 * grid.length())
    }

    pub fn check_fits(&self, grid: &Grid1D) -> Result<()> {
        let boundary_value = self.boundary_value(grid);
        if boundary_value < DOMAIN_FIT_TOLERANCE {
            Ok(())
        } else {
            Err(CkdvError::DomainFit {
                speed: self.speed,
                boundary_value,
            })
        }
    }
}

/// Wraps `z` into `[-L/2, L/2)`.
fn wrap(z: f64, length: f64) -> f64 {
    let r = (z + 0.5 * length).rem_euclid(length);
    r - 0.5 * length
}

/// Traveling profile at time `t`, crest at `x0 + C t` (periodically wrapped).
pub fn soliton_profile(spec: &SolitonSpec, grid: &Grid1D, t: f64) -> Result<RealField> {
    spec.check_fits(grid)?;
    let center = spec.x0 + spec.speed * t;
    RealField::from_fn(grid, |x| spec.value_at(wrap(x - center, grid.length())))
}

/// `u = φ`, every Clifford component zero.
pub fn soliton_state(spec: &SolitonSpec, grid: &Grid1D, n_components: usize) -> Result<CoupledState> {
    let u = soliton_profile(spec, grid, 0.0)?;
    CoupledState::new(u, vec![RealField::zeros(grid); n_components])
}

/// `max |f'' + f²/2 - C f|`.
pub fn tw_residual(f: &RealField, speed: f64) -> f64 {
    let f2 = f.deriv(2).expect("order 2");
    f2.values()
        .iter()
        .zip(f.values())
        .fold(0.0_f64, |m, (d2, v)| m.max((d2 + 0.5 * v * v - speed * v).abs()))
}

/// Closed-form errors of the evolved soliton on a sequence of grids.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpatialStudy {
    pub speed: f64,
    pub length: f64,
    pub t_end: f64,
    pub dt: f64,
    pub n_points: Vec<usize>,
    /// Max-norm error of `u` at `t_end`.
    pub errors: Vec<f64>,
}

impl SpatialStudy {
    /// `log2(e_k / e_{k+1})` per doubling.
    pub fn rates(&self) -> Vec<f64> {
        self.errors
            .windows(2)
            .zip(self.n_points.windows(2))
            .map(|(e, n)| (e[0] / e[1]).ln() / (n[1] as f64 / n[0] as f64).ln())
            .collect()
    }

    /// Faster than any fixed power: errors fall monotonically until they
    /// reach `floor`, and the apparent algebraic rate keeps growing while
    /// above it.
    pub fn is_super_algebraic(&self, floor: f64) -> bool {
        let rates = self.rates();
        let resolved: Vec<f64> = rates
            .iter()
            .zip(self.errors.windows(2))
            .filter(|(_, e)| e[1] > floor)
            .map(|(r, _)| *r)
            .collect();
        let decreasing = self
            .errors
            .windows(2)
            .all(|e| e[1] < e[0] || e[0] <= floor);
        let accelerating = resolved.windows(2).all(|r| r[1] > r[0]);
        decreasing && accelerating && resolved.len() >= 2
    }
}

pub fn spatial_refinement(
    spec: &SolitonSpec,
    length: f64,
    n_points: &[usize],
    dt: f64,
    t_end: f64,
) -> Result<SpatialStudy> {
    let errors = n_points
        .iter()
        .map(|&n| {
            let grid = Grid1D::new(length, n)?;
            let state = soliton_state(spec, &grid, 1)?;
            let cfg = SolverConfig::new(dt, t_end)
                .with_sample_every(usize::MAX)
                .allowing_large_dt();
            let out = evolve(&state, &cfg, &mut [])?;
            let exact = soliton_profile(spec, &grid, t_end)?;
            Ok(max_abs_diff(out.state.u().values(), exact.values()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpatialStudy {
        speed: spec.speed,
        length,
        t_end,
        dt,
        n_points: n_points.to_vec(),
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::Components;
    use std::f64::consts::PI;

    fn big() -> Grid1D {
        Grid1D::new(40.0 * PI, 512).unwrap()
    }

    #[test]
    fn unit_soliton_peak_and_residual() {
        let spec = SolitonSpec::new(1.0, 0.0).unwrap();
        let f = soliton_profile(&spec, &big(), 0.0).unwrap();
        // x = 0 is node 256
        assert_eq!(f.values()[256], 3.0);
        assert!(tw_residual(&f, 1.0) < 1e-10);
    }

    #[test]
    fn faster_soliton_is_taller_and_narrower() {
        let spec = SolitonSpec::new(4.0, 0.0).unwrap();
        assert_eq!(spec.peak(), 12.0);
        assert_eq!(spec.width_scale(), 0.5 * SolitonSpec::new(1.0, 0.0).unwrap().width_scale());
        // resolved on a finer grid
        let fine = Grid1D::new(40.0 * PI, 2048).unwrap();
        let f = soliton_profile(&spec, &fine, 0.0).unwrap();
        assert_eq!(f.values()[1024], 12.0);
        assert!(tw_residual(&f, 4.0) < 1e-10);
    }

    #[test]
    fn profile_travels_at_its_speed() {
        let g = big();
        let spec = SolitonSpec::new(1.0, 0.0).unwrap();
        let later = soliton_profile(&spec, &g, 1.0).unwrap();
        let moved = SolitonSpec::new(1.0, 1.0).unwrap();
        let expect = soliton_profile(&moved, &g, 0.0).unwrap();
        assert!(max_abs_diff(later.values(), expect.values()) < 1e-15);
        let shifted = soliton_profile(&spec, &g, 0.0).unwrap().shift(1.0);
        assert!(max_abs_diff(later.values(), shifted.values()) < 1e-12);
    }

    #[test]
    fn profile_wraps_periodically() {
        let g = big();
        let near_edge = SolitonSpec::new(1.0, 0.5 * g.length() - 0.1).unwrap();
        let f = soliton_profile(&near_edge, &g, 0.0).unwrap();
        assert!(f.values()[0] > 2.5);
        assert!(tw_residual(&f, 1.0) < 1e-10);
    }

    #[test]
    fn scaled_profile_is_not_a_solution() {
        let spec = SolitonSpec::new(1.0, 0.0).unwrap();
        let f = soliton_profile(&spec, &big(), 0.0).unwrap().scaled(1.1);
        assert!(tw_residual(&f, 1.0) > 1e-2);
        assert_eq!(tw_residual(&RealField::zeros(&big()), 1.0), 0.0);
    }

    #[test]
    fn scaling_family() {
        let one = SolitonSpec::new(1.0, 0.0).unwrap();
        for c in [0.25, 0.5, 2.0, 4.0] {
            let s = SolitonSpec::new(c, 0.0).unwrap();
            for z in [-3.0, -0.4, 0.0, 0.7, 5.0] {
                let lhs = s.value_at(z);
                let rhs = c * one.value_at(c.sqrt() * z);
                assert!((lhs - rhs).abs() <= 1e-14 * lhs.abs(), "C = {c}, z = {z}");
            }
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(SolitonSpec::new(0.0, 0.0).is_err());
        assert!(SolitonSpec::new(-1.0, 0.0).is_err());
        let small = Grid1D::new(10.0, 64).unwrap();
        let spec = SolitonSpec::new(0.25, 0.0).unwrap();
        assert!(matches!(
            soliton_profile(&spec, &small, 0.0),
            Err(CkdvError::DomainFit { .. })
        ));
    }

    #[test]
    fn soliton_state_has_no_clifford_part() {
        let spec = SolitonSpec::new(1.0, 0.0).unwrap();
        let s = soliton_state(&spec, &big(), 2).unwrap();
        assert_eq!(s.p_body().max_abs(), 0.0);
        assert_eq!(s.n_components(), 2);
    }
}
