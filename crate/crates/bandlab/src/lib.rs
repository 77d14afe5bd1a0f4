//! Numerical laboratory for random band matrices on the torus `Z_L^d`.
//!
//! The deterministic side (variance profiles, the semicircle transform,
//! diffusive kernels, self-energies, graph values) is exact up to floating
//! point; the random side samples complex Gaussian band matrices and checks
//! identities of their resolvents, per realization or in expectation.

pub mod config;
pub mod dft;
pub mod dump;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod graphcalc;
pub mod io;
pub mod kernels;
pub mod profile;
pub mod spectral;
pub mod torus;
pub mod window;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
