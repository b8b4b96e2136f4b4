//! Exact Gaussian-state dynamics for a chain of three harmonic oscillators
//! whose middle member mediates all coupling between the outer two, plus the
//! quantum-correlation measures (logarithmic negativity, Gaussian discord,
//! fidelity, dynamical fidelity susceptibility) evaluated on the reduced
//! state of the terminal pair.
//!
//! All states are zero-mean Gaussians represented by covariance matrices
//! normalized so the vacuum is the identity; dynamics uses closed-form
//! symplectic diagonalization, so any time can be evaluated directly with no
//! stepping error. A generic matrix-exponential propagator and a brute-force
//! measurement minimizer double as independent oracles for the closed forms.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod measures;
pub mod runner;
pub mod spectrum;
pub mod symplectic;
pub mod validate;

pub use error::{Error, Result};
pub use spectrum::{ClosedFormSpectrum, OscillatorParams, Regime};
pub use symplectic::{CovarianceState, ModeBasis};
