//! Multi-species moderately interacting particle systems with nonlinear
//! diffusion, their mean-field limits and the 1D cross-diffusion PDEs they
//! approximate.

pub mod config;
pub mod error;
pub mod kernels;
pub mod metrics;
pub mod noise;
pub mod nonlinearity;
pub mod particles;
pub mod pde;
mod quadrature;
pub mod runner;
pub mod sde;

pub use error::{Error, Result};
