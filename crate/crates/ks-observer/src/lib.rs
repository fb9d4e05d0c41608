//! Spectral-Galerkin simulation of the 1-D Kuramoto–Sivashinsky equation on the
//! unit torus, with a Luenberger observer driven by point measurements.
//!
//! The library has five layers, bottom to top:
//!
//! * [`basis`] — the periodic trigonometric eigenbasis, operator spectra,
//!   quadrature projection and the `H` / `V` / `D(A)` norms;
//! * [`sensing`] — sensor-set construction and admissibility, the output
//!   (measurement) operator and its matrices, and the projection constants
//!   attached to a sensor family;
//! * [`injection`] — the output-injection operator: gain matrix construction,
//!   spectral injection coefficients and monotonicity checks;
//! * [`dynamics`] — the flame/fluid Kuramoto–Sivashinsky right-hand sides, the
//!   IMEX (Crank–Nicolson + Adams–Bashforth) integrator, and the coupled
//!   nominal/observer simulation loop;
//! * [`analysis`] — error-norm time series, exponential decay-rate fits, and
//!   CSV export.
//!
//! The [`harness`] module wires these into the `ks-observer` command-line tool
//! (single runs, parameter sweeps and verification scenarios).
//!
//! A narrative guide with runnable examples lives in `book/`; its code blocks
//! are compiled as doc-tests from this crate.

// `!(x > 0.0)` is deliberate where it appears: it rejects NaN along with the
// out-of-range values, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::manual_is_multiple_of)]

pub mod analysis;
pub mod basis;
pub mod dynamics;
pub mod harness;
pub mod injection;
pub mod rng;
pub mod sensing;

mod error;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book_doctests;
