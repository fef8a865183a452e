//! Right-hand side of the coupled system
//!
//! ```text
//! u_t   = -u''' - u u' - (1/4) P(ξξ̄)'
//! φ_i,t = -φ_i''' - (1/2) (φ_i u)'
//! ```
//!
//! together with the variational derivatives of the Hamiltonian and the
//! flow those derivatives generate under the brackets
//! `{u,u} = ∂_x δ`, `{φ_i,φ_j} = δ_ij ∂_x δ`, `{u,φ_i} = 0`.
//!
//! Every quadratic product is dealiased with the two-thirds rule before it
//! is differentiated.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{CkdvError, Result};
use crate::grid::{Grid1D, RealField};
use crate::state::{Components, CoupledState, StateRate};

/// Multiplier `s` in the generated flow `∂_x (s δH/δ·)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BracketConvention {
    generator_scale: f64,
}

impl BracketConvention {
    /// `s = 1/2`: reproduces the equations of motion.
    pub const HALF: Self = Self {
        generator_scale: 0.5,
    };
    /// `s = 1`: the Hamiltonian exactly as written, unscaled.
    pub const ONE: Self = Self {
        generator_scale: 1.0,
    };

    pub fn new(generator_scale: f64) -> Result<Self> {
        if generator_scale == 0.5 || generator_scale == 1.0 {
            Ok(Self { generator_scale })
        } else {
            Err(CkdvError::InvalidParameter(format!(
                "generator scale must be 1 or 1/2, got {generator_scale}"
            )))
        }
    }

    pub fn generator_scale(&self) -> f64 {
        self.generator_scale
    }
}

/// Outcome of comparing the bracket flow against [`rhs`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BracketReport {
    pub residual_half: f64,
    pub residual_one: f64,
    pub inferred_scale: f64,
}

/// Evaluates the dealiased nonlinear terms on spectral data. Shared by
/// [`rhs`] and the time stepper so both see identical arithmetic.
pub(crate) struct NonlinearKernel {
    grid: Grid1D,
    /// `-i k` with the Nyquist mode (and, when dealiasing, the top third) removed.
    minus_ik: Vec<Complex64>,
    physical: Vec<Vec<f64>>,
    product: Vec<f64>,
    scratch: Vec<Complex64>,
}

impl NonlinearKernel {
    pub(crate) fn new(grid: &Grid1D, n_components: usize, dealias: bool) -> Self {
        let n = grid.n_points();
        let nyq = grid.nyquist_index();
        let minus_ik = grid
            .wavenumbers()
            .iter()
            .enumerate()
            .map(|(m, &k)| {
                if m == nyq || (dealias && !grid.keeps_mode(m)) {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, -k)
                }
            })
            .collect();
        Self {
            grid: grid.clone(),
            minus_ik,
            physical: vec![vec![0.0; n]; n_components + 1],
            product: vec![0.0; n],
            scratch: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Writes the nonlinear part of the rate for spectral fields `[û, φ̂_1, ...]`
    /// into `out` and returns the largest physical magnitude of the input.
    pub(crate) fn eval(&mut self, fields: &[Vec<Complex64>], out: &mut [Vec<Complex64>]) -> f64 {
        let mut peak = 0.0_f64;
        for (spec, phys) in fields.iter().zip(self.physical.iter_mut()) {
            self.scratch.copy_from_slice(spec);
            self.grid.inverse_into(&mut self.scratch, phys);
            for v in phys.iter() {
                // f64::max would swallow NaN
                peak = if v.is_finite() {
                    peak.max(v.abs())
                } else {
                    f64::INFINITY
                };
            }
        }
        let (u, phi) = self.physical.split_first().expect("u is always present");

        for (j, p) in self.product.iter_mut().enumerate() {
            let body: f64 = phi.iter().map(|f| f[j] * f[j]).sum();
            *p = 0.5 * u[j] * u[j] + 0.25 * body;
        }
        self.grid.forward_into(&self.product, &mut out[0]);
        for (c, m) in out[0].iter_mut().zip(&self.minus_ik) {
            *c *= m;
        }

        for (f, target) in phi.iter().zip(out[1..].iter_mut()) {
            for ((p, a), b) in self.product.iter_mut().zip(u).zip(f) {
                *p = 0.5 * a * b;
            }
            self.grid.forward_into(&self.product, target);
            for (c, m) in target.iter_mut().zip(&self.minus_ik) {
                *c *= m;
            }
        }
        peak
    }
}

fn check_finite(state: &CoupledState) -> Result<()> {
    if state.all_fields().all(|f| f.values().iter().all(|v| v.is_finite())) {
        Ok(())
    } else {
        Err(CkdvError::NonFinite("state"))
    }
}

/// Time derivative of the coupled system.
pub fn rhs(state: &CoupledState) -> Result<StateRate> {
    check_finite(state)?;
    let grid = state.grid();
    let spectra: Vec<Vec<Complex64>> = state.all_fields().map(|f| f.spectrum()).collect();
    let mut rates = vec![vec![Complex64::new(0.0, 0.0); grid.n_points()]; spectra.len()];
    let mut kernel = NonlinearKernel::new(grid, state.n_components(), true);
    kernel.eval(&spectra, &mut rates);

    let third = grid.derivative_symbol(3)?;
    let mut fields = rates.into_iter().zip(&spectra).map(|(mut rate, spec)| {
        for ((r, s), d3) in rate.iter_mut().zip(spec).zip(&third) {
            *r -= d3 * s;
        }
        RealField::from_spectrum(grid, rate)
    });
    let du = fields.next().expect("u rate");
    let dphi: Vec<RealField> = fields.collect();
    let out = StateRate::new(du, dphi)?;
    if out.all_fields().all(|f| f.values().iter().all(|v| v.is_finite())) {
        Ok(out)
    } else {
        Err(CkdvError::NonFinite("rate"))
    }
}

/// Spectrum of `f` with the dealiased band removed.
fn dealiased_spectrum(f: &RealField) -> Vec<Complex64> {
    let grid = f.grid();
    let mut spec = f.spectrum();
    for (m, c) in spec.iter_mut().enumerate() {
        if !grid.keeps_mode(m) {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    spec
}

/// `δH/δu = -u² - P/2 - 2u''`.
pub fn grad_h_u(state: &CoupledState) -> RealField {
    let grid = state.grid();
    let u = state.u();
    let mut quad = u.mul(u).expect("same grid");
    let body = state.p_body();
    quad = quad.axpy(0.5, &body).expect("same grid");
    let mut spec = dealiased_spectrum(&quad);
    let second = grid.derivative_symbol(2).expect("order 2");
    for ((c, s), d2) in spec.iter_mut().zip(u.spectrum()).zip(&second) {
        *c = -*c - 2.0 * d2 * s;
    }
    RealField::from_spectrum(grid, spec)
}

/// `δH/δφ_i = -u φ_i - 2 φ_i''`.
pub fn grad_h_phi(state: &CoupledState, i: usize) -> Result<RealField> {
    let grid = state.grid();
    let phi = state.phi_component(i)?;
    let quad = state.u().mul(phi)?;
    let mut spec = dealiased_spectrum(&quad);
    let second = grid.derivative_symbol(2)?;
    for ((c, s), d2) in spec.iter_mut().zip(phi.spectrum()).zip(&second) {
        *c = -*c - 2.0 * d2 * s;
    }
    Ok(RealField::from_spectrum(grid, spec))
}

/// Flow generated by `s·H` under the brackets: `∂_x (s δH/δ·)` for every field.
pub fn bracket_flow(state: &CoupledState, conv: BracketConvention) -> StateRate {
    let s = conv.generator_scale();
    let flow = |g: RealField| g.deriv(1).expect("order 1").scaled(s);
    let du = flow(grad_h_u(state));
    let dphi = (0..state.n_components())
        .map(|i| flow(grad_h_phi(state, i).expect("index in range")))
        .collect();
    StateRate::new(du, dphi).expect("shape follows the state")
}

/// Measures how well each admissible generator scale reproduces [`rhs`].
pub fn bracket_consistency(state: &CoupledState) -> Result<BracketReport> {
    let rate = rhs(state)?;
    let norm = rate.max_abs();
    if state.max_abs() == 0.0 || norm == 0.0 {
        return Err(CkdvError::DegenerateNormalization(
            "the rate of the supplied state vanishes",
        ));
    }
    let residual = |conv| -> Result<f64> {
        Ok(bracket_flow(state, conv).max_abs_diff(&rate)? / norm)
    };
    let residual_half = residual(BracketConvention::HALF)?;
    let residual_one = residual(BracketConvention::ONE)?;
    let inferred_scale = if residual_half <= residual_one {
        BracketConvention::HALF.generator_scale()
    } else {
        BracketConvention::ONE.generator_scale()
    };
    Ok(BracketReport {
        residual_half,
        residual_one,
        inferred_scale,
    })
}
