//! Out-of-time-order correlators for bound vibrational states of diatomic
//! potentials, with classical and semiclassical growth-rate estimates.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dvr;
pub mod eigen;
pub mod pipeline;
pub mod potential;
pub mod presets;
pub mod roots;
pub mod sensitivity;
pub mod spectral;
pub mod spline;
