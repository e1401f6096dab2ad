//! Numerical laboratory for the stochastic diffraction-amplification problem
//!
//! ```text
//! ∂ₜE − (i/2) ∂ₓ²E = λ |S(x,t)|² E,   x on the unit circle,   E(x,0) = 1
//! ```
//!
//! driven by a finite-Fourier complex Gaussian field `S`. The crate provides
//! the driver ([`driver_field`]), the exact spectral analysis of the
//! diffraction-free critical coupling ([`gamma_spectral`], [`amplifier_exact`]),
//! a Strang split-step Fourier solver ([`pde_solver`]), the deterministic
//! large-amplitude analysis along the top eigen-direction ([`asymptotics`]),
//! and the reproducible experiment harness behind the `diffamp` binary
//! ([`scenario`], [`table`]).

pub mod amplifier_exact;
pub mod asymptotics;
pub mod driver_field;
pub mod error;
pub mod gamma_spectral;
pub mod pde_solver;
pub mod rng;
pub mod scenario;
pub mod stats;
pub mod table;

pub use error::{Error, Result};

pub use num_complex::Complex64;

/// Version string echoed into every output directory.
pub const VERSION: &str = concat!("diffamp ", env!("CARGO_PKG_VERSION"));
