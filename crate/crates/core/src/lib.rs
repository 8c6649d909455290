//! Simulation and convergence diagnostics for mixed stochastic delay
//! differential equations
//!
//! ```text
//! dX(t) = a(t, X_t) dt + b(t, X_t) dW(t) + c(t, X_t) dZ(t),   X(t) = eta(t) on [-r, 0],
//! ```
//!
//! driven by a Wiener process `W` and a Hölder-continuous process `Z`
//! (fractional Brownian motion with `H > 1/2`).

// Negated comparisons are deliberate: `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod driver;
pub mod experiments;
pub mod fraccalc;
pub mod sdde;
pub mod solver;
pub mod path;

pub use path::GridPath;
