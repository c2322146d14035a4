//! Modified q²-Bessel functions as eigenfunctions of the two-body
//! relativistic open Toda q-difference Hamiltonian, their Macdonald-type
//! combinations, Whittaker vectors, Mellin–Barnes representations, and an
//! exact verification layer for the U_q(sl2) module structure behind them.
//!
//! Numeric code works in double-precision complex arithmetic with explicit
//! truncation diagnostics; the `hopf` module is exact.

// `!(x > 0.0)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod hopf;
pub mod mellin;
pub mod qbessel;
pub mod qcalc;
pub mod quadrature;
pub mod toda;
pub mod whittaker;

pub use error::{QError, QResult};
pub use num_complex::Complex64;
pub use qcalc::{Delta, QContext, SeriesValue, Tolerances};
