//! Numerical laboratory for semilinear elliptic problems `Δu + f(u) = 0` on
//! truncated quarter- and half-planes: one-dimensional limit profiles,
//! finite-difference solvers, radial subsolutions and the sliding method,
//! translation-semiflow analysis and Liouville-type sweeps.

// `!(x > y)` is deliberate: it also rejects NaN. Index loops mirror the
// banded-matrix algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod elliptic;
pub mod error;
pub mod liouville;
pub mod nonlinearity;
pub mod ode;
pub mod plot;
pub mod profile1d;
pub mod quad;
pub mod trace;
pub mod trajectory;

pub use error::{Error, Result};
pub use nonlinearity::Nonlinearity;
