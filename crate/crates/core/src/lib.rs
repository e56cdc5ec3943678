//! Eigenvalues, backward errors and minimal structured perturbations for
//! rational eigenvalue problems `R(λ)x = 0` with
//! `R(λ) = P(λ) + C (A − λE)⁻¹ B`.

pub mod backward_error;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod linearize;
pub mod oracle;
pub mod perturb;
pub mod problems;
pub mod realization;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};
pub use num_complex::Complex64;
pub use realization::{MatrixPolynomial, NormSelector, Realization, Tolerances};
