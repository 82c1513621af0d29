//! Fractional variational integrators built on convolution quadrature (CQ).
//!
//! The crate provides, bottom up:
//!
//! - [`cq`]: convolution-quadrature weights generated from backward
//!   differentiation formulas (BDF1..6), left/right discrete convolutions,
//!   and starting-quadrature corrections that restore full order on data
//!   with power-type behaviour near `t = 0`.
//! - [`fracops`]: closed-form Riemann-Liouville oracles (Gamma-function
//!   formulas for power functions and power-times-sine series) plus a
//!   refined numerical fallback for general series.
//! - [`models`]: mechanical models (harmonic oscillator, forced oscillator
//!   with the two classic rigid-plate forcings) and the two conservative
//!   discretizations: the midpoint two-point discrete Lagrangian and the
//!   Galerkin discrete Lagrangian over polynomial control points with a
//!   quadrature rule.
//! - [`integrators`]: the damped discrete Euler-Lagrange stepping schemes
//!   (midpoint and Galerkin variants) with an implicit Newton solve per
//!   step, plus Euler baselines and a time-reversal residual check.
//! - [`bench`]: max-norm global errors, log-log order regression,
//!   CQ saturation studies and energy diagnostics.
//!
//! A note on attainable orders: the fractional damping term couples to the
//! main grid nodes only. That coupling carries its own second-order
//! quadrature error in the underlying discrete action, so the damped
//! schemes top out at global order two even when both the conservative
//! part and the convolution quadrature are of higher order. Starting
//! corrections remove the low-order startup error of the convolution
//! quadrature itself (observable on operator-level benchmarks) but cannot
//! remove the coupling defect.

pub mod bench;
pub mod cq;
pub mod error;
pub mod fracops;
pub mod grid;
pub mod integrators;
mod linalg;
pub mod models;

pub use error::{FviError, Result};
pub use grid::GridSeries;
