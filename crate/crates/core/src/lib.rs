//! Numerical construction of potential wells whose brake orbits (and, in a
//! variant, homoclinics) can be counted exactly.
//!
//! The pipeline, bottom up:
//!
//! * [`ode`]: adaptive Runge–Kutta integration with continuous output and events;
//! * [`generating`]: the cubic generating function and its matching coefficients;
//! * [`geodesics`]: the normalized gradient flow of the generating function,
//!   its Jacobian columns, its inverse, and the orthogonality/unit-speed checks;
//! * [`maupertuis`]: conversion of Jacobi geodesics into Newtonian orbits;
//! * [`bump`] and [`potential`]: the glued global potential;
//! * [`orbits`]: shooting from the outer boundary and the orbit census;
//! * [`scenario`] and [`harness`]: config files, reports and exports.

// `!(x > 0.0)` style guards are deliberate: they reject NaN along with the range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod ode;
pub mod linalg;
pub mod dual;
pub mod params;
pub mod generating;
pub mod geodesics;
pub mod bump;
pub mod potential;
pub mod maupertuis;
pub mod orbits;
pub mod scenario;
pub mod harness;

pub use error::{Error, Result};
pub use params::ModelParams;
