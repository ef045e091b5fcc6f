//! Numerical laboratory for the Burgers equation with a steady external force
//! on [0,1].
//!
//! The crate solves the Neumann eigenproblem of `-∂²xx + V`, conjugates the
//! Burgers flow to linear and nonlinear heat flows through the Cole-Hopf
//! transforms, and evaluates the explicit Koopman decompositions of the
//! nonlinear heat and Burgers flows together with their convergence
//! certificates.

pub mod cli;
pub mod cole_hopf;
pub mod error;
pub mod flows;
pub mod grid;
pub mod invariants;
pub mod koopman;
pub mod spectral;
pub mod tridiag;

pub use error::{KblError, Result};
pub use grid::{Grid, ScalarField};
pub use spectral::{solve_eigen, Potential, SpectralBasis};
