//! Field state of the coupled system: the real field `u` and the real
//! coefficients `φ_i` of the Clifford-valued field `ξ = Σ φ_i e_i`.
//!
//! Higher-grade coefficients (`φ_ij e_i e_j`, ...) obey the same linear
//! equation as the grade-one ones and enter `u` only through the body
//! `P(ξξ̄)`, so each of them simply occupies another component slot.

use crate::error::{CkdvError, Result};
use crate::grid::{Grid1D, RealField};

/// Largest supported number of Clifford components.
pub const MAX_COMPONENTS: usize = 16;

/// Read access shared by states and their time derivatives.
pub trait Components {
    fn u_part(&self) -> &RealField;
    fn phi_parts(&self) -> &[RealField];

    fn n_components(&self) -> usize {
        self.phi_parts().len()
    }

    fn all_fields(&self) -> Box<dyn Iterator<Item = &RealField> + '_> {
        Box::new(std::iter::once(self.u_part()).chain(self.phi_parts()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledState {
    u: RealField,
    phi: Vec<RealField>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateRate {
    pub du: RealField,
    pub dphi: Vec<RealField>,
}

fn check_shape(u: &RealField, phi: &[RealField]) -> Result<()> {
    if phi.is_empty() || phi.len() > MAX_COMPONENTS {
        return Err(CkdvError::ShapeMismatch(format!(
            "component count must be in 1..={MAX_COMPONENTS}, got {}",
            phi.len()
        )));
    }
    for p in phi {
        u.grid().check_same(p.grid())?;
    }
    Ok(())
}

impl CoupledState {
    pub fn new(u: RealField, phi: Vec<RealField>) -> Result<Self> {
        check_shape(&u, &phi)?;
        Ok(Self { u, phi })
    }

    pub fn zeros(grid: &Grid1D, n_components: usize) -> Result<Self> {
        Self::new(
            RealField::zeros(grid),
            vec![RealField::zeros(grid); n_components],
        )
    }

    pub(crate) fn from_parts_unchecked(u: RealField, phi: Vec<RealField>) -> Self {
        Self { u, phi }
    }

    pub fn grid(&self) -> &Grid1D {
        self.u.grid()
    }

    pub fn u(&self) -> &RealField {
        &self.u
    }

    pub fn phi(&self) -> &[RealField] {
        &self.phi
    }

    pub fn phi_component(&self, i: usize) -> Result<&RealField> {
        self.phi.get(i).ok_or(CkdvError::IndexOutOfRange {
            index: i,
            count: self.phi.len(),
        })
    }

    pub fn into_parts(self) -> (RealField, Vec<RealField>) {
        (self.u, self.phi)
    }

    /// Body of `ξ ξ̄`: the pointwise sum of squared components.
    pub fn p_body(&self) -> RealField {
        let n = self.grid().n_points();
        let mut acc = vec![0.0; n];
        for p in &self.phi {
            for (a, v) in acc.iter_mut().zip(p.values()) {
                *a += v * v;
            }
        }
        RealField::from_raw(self.grid(), acc)
    }

    /// Spectral derivative of [`p_body`](Self::p_body).
    pub fn p_body_deriv(&self) -> RealField {
        self.p_body()
            .deriv(1)
            .expect("first derivative is always supported")
    }

    /// Multiplies every field by `a`.
    pub fn scaled(&self, a: f64) -> CoupledState {
        Self {
            u: self.u.scaled(a),
            phi: self.phi.iter().map(|p| p.scaled(a)).collect(),
        }
    }

    /// Translates every field right by `a` (spectral shift).
    pub fn shift(&self, a: f64) -> CoupledState {
        Self {
            u: self.u.shift(a),
            phi: self.phi.iter().map(|p| p.shift(a)).collect(),
        }
    }

    /// Translates `u` only, leaving the Clifford components in place.
    pub fn shift_u(&self, a: f64) -> CoupledState {
        Self {
            u: self.u.shift(a),
            phi: self.phi.clone(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.all_fields().fold(0.0_f64, |m, f| m.max(f.max_abs()))
    }

    /// `self - other`, both states on one grid with equal component counts.
    pub fn sub(&self, other: &CoupledState) -> Result<CoupledState> {
        axpy_state(-1.0, other, self)
    }
}

impl Components for CoupledState {
    fn u_part(&self) -> &RealField {
        &self.u
    }
    fn phi_parts(&self) -> &[RealField] {
        &self.phi
    }
}

impl StateRate {
    pub fn new(du: RealField, dphi: Vec<RealField>) -> Result<Self> {
        check_shape(&du, &dphi)?;
        Ok(Self { du, dphi })
    }

    pub fn scaled(&self, a: f64) -> StateRate {
        Self {
            du: self.du.scaled(a),
            dphi: self.dphi.iter().map(|p| p.scaled(a)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.all_fields().fold(0.0_f64, |m, f| m.max(f.max_abs()))
    }

    /// Largest pointwise difference over all fields.
    pub fn max_abs_diff(&self, other: &StateRate) -> Result<f64> {
        check_same_shape(self, other)?;
        Ok(self
            .all_fields()
            .zip(other.all_fields())
            .map(|(a, b)| crate::grid::max_abs_diff(a.values(), b.values()))
            .fold(0.0, f64::max))
    }
}

impl Components for StateRate {
    fn u_part(&self) -> &RealField {
        &self.du
    }
    fn phi_parts(&self) -> &[RealField] {
        &self.dphi
    }
}

fn check_same_shape(a: &impl Components, b: &impl Components) -> Result<()> {
    if a.n_components() != b.n_components() {
        return Err(CkdvError::ShapeMismatch(format!(
            "{} vs {} components",
            a.n_components(),
            b.n_components()
        )));
    }
    a.u_part().grid().check_same(b.u_part().grid())
}

/// Componentwise `y + a x`.
pub fn axpy_state(a: f64, x: &impl Components, y: &CoupledState) -> Result<CoupledState> {
    check_same_shape(x, y)?;
    let u = y.u.axpy(a, x.u_part())?;
    let phi = y
        .phi
        .iter()
        .zip(x.phi_parts())
        .map(|(yp, xp)| yp.axpy(a, xp))
        .collect::<Result<Vec<_>>>()?;
    let out = CoupledState { u, phi };
    if out.all_fields().all(RealField::is_finite) {
        Ok(out)
    } else {
        Err(CkdvError::NonFinite("axpy result"))
    }
}
