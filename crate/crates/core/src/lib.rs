//! Numerical laboratory for the coupled KdV system obtained by replacing the
//! Grassmann algebra of N=1 super-KdV with a Clifford algebra:
//!
//! ```text
//! u_t = -u''' - u u' - (1/4) (Σ φ_i²)'
//! ξ_t = -ξ''' - (1/2) (ξ u)'
//! ```
//!
//! The crate provides the pseudo-spectral discretization ([`grid`]), the
//! field state ([`state`]), the equations of motion and their Hamiltonian
//! structure ([`dynamics`]), an integrating-factor RK4 solver
//! ([`integrator`]), the conserved quantities and a-priori norm bound
//! ([`invariants`]), closed-form one-solitons ([`solitons`]) and the
//! Liapunov stability experiments ([`stability`]).

pub mod dynamics;
pub mod error;
pub mod grid;
pub mod integrator;
pub mod invariants;
pub mod solitons;
pub mod stability;
pub mod state;

pub use error::{CkdvError, Result};
pub use grid::{Grid1D, RealField};
pub use state::{axpy_state, Components, CoupledState, StateRate};
