//! Ahlfors-type currents of holomorphic discs in flat complex tori, and the
//! ping-pong construction that glues countably many discs into one entire curve.
//!
//! The crate is organised bottom-up: [`torus`] describes the target, [`disc`]
//! the polynomial-lift discs, [`current`] the normalized integration currents,
//! [`approx`] polynomial approximation and bridges, [`conformal`] numerical
//! Riemann maps onto dumbbells, and [`pipeline`] the inductive construction.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod approx;
pub mod checkpoint;
pub mod config;
pub mod conformal;
pub mod current;
pub mod disc;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod hexfloat;
pub mod pipeline;
pub mod quadrature;
pub mod report;
pub mod torus;

pub use error::{Error, Result};
pub use exec::Exec;
pub use num_complex::Complex64;
