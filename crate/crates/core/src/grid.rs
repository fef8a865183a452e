//! Periodic one-dimensional grid with Fourier spectral calculus.
//!
//! The domain is `[-L/2, L/2)` sampled at `N` uniformly spaced nodes. All
//! derivatives are computed in transform space, integrals use the
//! rectangle rule (which coincides with the trapezoid rule on periodic
//! data), and the line primitive `∫_{-∞}^x f` is approximated by anchoring
//! the primitive at the left edge of the domain.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{CkdvError, Result};

/// Smallest supported number of nodes.
pub const MIN_POINTS: usize = 16;

/// Default bound on `|f|` at the left edge for [`RealField::antiderivative`].
pub const DEFAULT_DECAY_TOLERANCE: f64 = 1e-8;

struct GridInner {
    length: f64,
    nodes: Vec<f64>,
    wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid. Cloning is cheap; FFT plans are shared.
#[derive(Clone)]
pub struct Grid1D {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid1D")
            .field("length", &self.length())
            .field("n_points", &self.n_points())
            .finish()
    }
}

impl PartialEq for Grid1D {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.length() == other.length() && self.n_points() == other.n_points())
    }
}

impl Grid1D {
    /// Builds the grid on `[-L/2, L/2)` with `n_points` nodes.
    pub fn new(length: f64, n_points: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(CkdvError::InvalidGrid(format!(
                "length must be positive and finite, got {length}"
            )));
        }
        if n_points < MIN_POINTS || !n_points.is_power_of_two() {
            return Err(CkdvError::InvalidGrid(format!(
                "node count must be a power of two >= {MIN_POINTS}, got {n_points}"
            )));
        }
        let dx = length / n_points as f64;
        let nodes = (0..n_points)
            .map(|j| -0.5 * length + j as f64 * dx)
            .collect();
        let wavenumbers = (0..n_points)
            .map(|m| 2.0 * PI * signed_mode(m, n_points) as f64 / length)
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n_points);
        let inverse = planner.plan_fft_inverse(n_points);
        Ok(Self {
            inner: Arc::new(GridInner {
                length,
                nodes,
                wavenumbers,
                forward,
                inverse,
            }),
        })
    }

    pub fn length(&self) -> f64 {
        self.inner.length
    }

    pub fn n_points(&self) -> usize {
        self.inner.nodes.len()
    }

    pub fn spacing(&self) -> f64 {
        self.inner.length / self.n_points() as f64
    }

    pub fn nodes(&self) -> &[f64] {
        &self.inner.nodes
    }

    /// Wavenumbers in FFT order: `0, 1, ..., N/2, -N/2+1, ..., -1` times `2π/L`.
    /// The entry at `N/2` is the Nyquist mode.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.inner.wavenumbers
    }

    pub fn nyquist_index(&self) -> usize {
        self.n_points() / 2
    }

    /// Largest `|m|` kept by the two-thirds rule.
    pub fn dealias_cutoff(&self) -> usize {
        self.n_points() / 3
    }

    /// Whether mode `m` (FFT order) survives dealiasing.
    pub fn keeps_mode(&self, m: usize) -> bool {
        3 * signed_mode(m, self.n_points()).unsigned_abs() as usize <= self.n_points()
    }

    pub(crate) fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.inner.forward.process(&mut buf);
        buf
    }

    /// Inverse transform of `spectrum` (consumed as scratch) with `1/N` scaling;
    /// returns the real part.
    pub(crate) fn inverse(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        self.inner.inverse.process(&mut spectrum);
        let scale = 1.0 / self.n_points() as f64;
        spectrum.iter().map(|c| c.re * scale).collect()
    }

    pub(crate) fn inverse_into(&self, spectrum: &mut [Complex64], out: &mut [f64]) {
        self.inner.inverse.process(spectrum);
        let scale = 1.0 / self.n_points() as f64;
        for (o, c) in out.iter_mut().zip(spectrum.iter()) {
            *o = c.re * scale;
        }
    }

    pub(crate) fn forward_into(&self, values: &[f64], out: &mut [Complex64]) {
        for (o, &v) in out.iter_mut().zip(values) {
            *o = Complex64::new(v, 0.0);
        }
        self.inner.forward.process(out);
    }

    /// Transform-space multiplier of `d^order/dx^order`, Nyquist zeroed for odd orders.
    pub(crate) fn derivative_symbol(&self, order: u32) -> Result<Vec<Complex64>> {
        if !(1..=3).contains(&order) {
            return Err(CkdvError::UnsupportedOrder(order));
        }
        let nyq = self.nyquist_index();
        Ok(self
            .wavenumbers()
            .iter()
            .enumerate()
            .map(|(m, &k)| {
                if order % 2 == 1 && m == nyq {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, k).powu(order)
                }
            })
            .collect())
    }

    pub(crate) fn check_same(&self, other: &Grid1D) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(CkdvError::GridMismatch)
        }
    }
}

fn signed_mode(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// Node samples of a real function on a [`Grid1D`]. Values are always finite.
#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    grid: Grid1D,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: &Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(CkdvError::LengthMismatch {
                expected: grid.n_points(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CkdvError::NonFinite("field samples"));
        }
        Ok(Self::from_raw(grid, values))
    }

    pub fn zeros(grid: &Grid1D) -> Self {
        Self::from_raw(grid, vec![0.0; grid.n_points()])
    }

    pub fn constant(grid: &Grid1D, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.n_points()])
    }

    /// Samples `f` at the grid nodes.
    pub fn from_fn(grid: &Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().iter().map(|&x| f(x)).collect())
    }

    pub(crate) fn from_raw(grid: &Grid1D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_points());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub(crate) fn from_spectrum(grid: &Grid1D, spectrum: Vec<Complex64>) -> Self {
        Self::from_raw(grid, grid.inverse(spectrum))
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub(crate) fn spectrum(&self) -> Vec<Complex64> {
        self.grid.forward(&self.values)
    }

    /// Spectral derivative of order 1, 2 or 3.
    pub fn deriv(&self, order: u32) -> Result<RealField> {
        let symbol = self.grid.derivative_symbol(order)?;
        let mut spec = self.spectrum();
        for (c, s) in spec.iter_mut().zip(&symbol) {
            *c *= s;
        }
        Ok(Self::from_spectrum(&self.grid, spec))
    }

    /// `∫ f dx` over one period: `L` times the sample mean.
    pub fn integrate(&self) -> f64 {
        self.grid.spacing() * self.values.iter().sum::<f64>()
    }

    /// `F(x) = ∫_{x_0}^{x} f(s) ds` with the left node `x_0` standing in for `-∞`.
    pub fn antiderivative(&self) -> Result<RealField> {
        self.antiderivative_with_tolerance(DEFAULT_DECAY_TOLERANCE)
    }

    pub fn antiderivative_with_tolerance(&self, tolerance: f64) -> Result<RealField> {
        let edge = self.values[0].abs();
        if edge > tolerance {
            return Err(CkdvError::DecayViolation {
                edge_value: edge,
                tolerance,
            });
        }
        let grid = &self.grid;
        let n = grid.n_points();
        let nyq = grid.nyquist_index();
        let mut spec = self.spectrum();
        // The mean is integrated exactly as a ramp; the zero-mean part is
        // inverted mode by mode.
        let mean = spec[0].re / n as f64;
        spec[0] = Complex64::new(0.0, 0.0);
        spec[nyq] = Complex64::new(0.0, 0.0);
        for (c, &k) in spec.iter_mut().zip(grid.wavenumbers()).skip(1) {
            *c /= Complex64::new(0.0, k);
        }
        let periodic = grid.inverse(spec);
        let x0 = grid.nodes()[0];
        let anchor = periodic[0];
        let values = periodic
            .iter()
            .zip(grid.nodes())
            .map(|(g, &x)| g - anchor + mean * (x - x0))
            .collect();
        Ok(Self::from_raw(grid, values))
    }

    /// Removes all modes above two thirds of the largest resolved wavenumber.
    pub fn dealias(&self) -> RealField {
        let mut spec = self.spectrum();
        for (m, c) in spec.iter_mut().enumerate() {
            if !self.grid.keeps_mode(m) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        Self::from_spectrum(&self.grid, spec)
    }

    /// Translates the field to the right by `a`: returns `f(x - a)`,
    /// exact for band-limited data and any real `a`.
    pub fn shift(&self, a: f64) -> RealField {
        let mut spec = self.spectrum();
        for (c, &k) in spec.iter_mut().zip(self.grid.wavenumbers()) {
            *c *= Complex64::from_polar(1.0, -k * a);
        }
        Self::from_spectrum(&self.grid, spec)
    }

    pub fn scaled(&self, a: f64) -> RealField {
        Self::from_raw(&self.grid, self.values.iter().map(|v| a * v).collect())
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &RealField) -> Result<RealField> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(y, x)| y + a * x)
            .collect();
        Ok(Self::from_raw(&self.grid, values))
    }

    pub fn sub(&self, other: &RealField) -> Result<RealField> {
        self.axpy(-1.0, other)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &RealField) -> Result<RealField> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Ok(Self::from_raw(&self.grid, values))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<RealField> {
        Self::new(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}
