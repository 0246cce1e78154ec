//! Numerical lifespan experiments for the semilinear wave equation with
//! time-dependent damping
//!
//! ```text
//! ∂ₜ²u − Δu + b(t) ∂ₜu = |u|^p,   b(t) = (t+1)^(-β),
//! u(0) = ε u₀,  ∂ₜu(0) = ε u₁.
//! ```
//!
//! Modules follow the experiment pipeline: auxiliary functions of the
//! damping ([`damping`]), heat kernels ([`heat_kernel`]), the spectral
//! time integrator ([`solver`]), blow-up detection and scaling fits
//! ([`lifespan`]), the heat-kernel identity certificate ([`identity`]) and
//! the comparison ODEs ([`ode_lab`]).

pub mod damping;
pub mod error;
pub mod heat_kernel;
pub mod identity;
pub mod lifespan;
pub mod ode_lab;
pub mod quadrature;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};

/// Crate version, recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
