//! Numerical recovery of power-type nonlinear Schrodinger nonlinearities from
//! small-data scattering.
//!
//! The pipeline runs forward simulation of `(i d_t + Laplacian) u = F(t,x,u)`,
//! reads out the Born functional of concentrated Gaussian data, and inverts the
//! resulting convolution identity against the distribution function of the free
//! Gaussian flow.

pub mod born;
pub mod deconvolve;
pub mod error;
pub mod exec;
pub mod fit;
pub mod grid;
pub mod laplace;
pub mod mu;
pub mod nonlinearity;
pub mod pipeline;
pub mod propagator;
pub mod quad;
pub mod solver;

pub use error::{Error, Result};
pub use exec::Execution;
