//! Semi-discrete approximation of a 1D parabolic partial integro-differential
//! equation with Robin boundary input.
//!
//! The PIDE
//!
//! ```text
//! u_t = theta(x) u_xx + sigma(x) u_x + lambda(x) u + int_0^x phi(x, s) u(s, t) ds
//! alpha0 u_x(0,t) + beta0 u(0,t) = 0,   alpha1 u_x(1,t) + beta1 u(1,t) = f(t)
//! ```
//!
//! is reduced to the n-th order ODE system `v' = P_n v + B_n f_n(t)` on the
//! interior grid `x_j = j/(n+1)` by second-order finite differences (with
//! ghost-point Robin corrections folded into the first and last rows) and a
//! Riemann sum for the Volterra term. The crate provides:
//!
//! - [`expr`]: a whitelist arithmetic-expression parser so coefficients,
//!   kernels and inputs can live in configuration files;
//! - [`model`]: problem specifications with piecewise coefficients;
//! - [`disc`]: assembly of the matrices `L_n`, `D_n`, `Phi_n`, `P_n`, `B_n`;
//! - [`gridops`]: the restriction/extension operators and discrete norms;
//! - [`lift`]: the boundary lifting `nu` and pointwise integro-differential
//!   operator application;
//! - [`ode`]: Crank-Nicolson integration and a dense matrix exponential;
//! - [`analysis`]: numerical certification of the consistency, analyticity
//!   and discrete-Sobolev properties.

pub mod analysis;
pub mod disc;
pub mod error;
pub mod expr;
pub mod gridops;
pub mod lift;
pub mod linalg;
pub mod model;
pub mod ode;

pub use error::{Error, Result};
