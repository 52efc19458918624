//! Kernels, fractional calculus, samplers, quadrature functionals and
//! finite-difference PDE residuals for Brownian sheets run on Brownian or
//! inverse-stable-subordinator clocks.
//!
//! The scalar-agnostic pieces (Caputo schemes, stencils, heat kernels) are
//! generic over [`Real`]; the aliases below fix the scalar type.

pub mod csv;
pub mod densities;
pub mod error;
pub mod extrapolate;
pub mod fractional;
pub mod grid;
pub mod quadrature;
pub mod report;
pub mod scalar;
pub mod special;
pub mod talbot;
pub mod initial_functions;
pub mod moments;
pub mod samplers;
pub mod pde_verify;
pub mod solutions;

pub use error::{Result, SheetError};
pub use scalar::Real;

pub type FractionalOrder = fractional::FractionalOrder<f64>;
pub type FractionalOrder32 = fractional::FractionalOrder<f32>;
pub type TimeGrid = fractional::TimeGrid<f64>;
pub type TimeGrid32 = fractional::TimeGrid<f32>;
pub type CaputoResult = fractional::CaputoResult<f64>;
pub type CaputoResult32 = fractional::CaputoResult<f32>;
