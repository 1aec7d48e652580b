//! Radially symmetric point defects of the 2-D Landau-de Gennes Q-tensor model.
//!
//! The crate solves the singular radial system for the profile pair (u, v),
//! assembles the radial and Fourier-mode second-variation forms as banded
//! generalized eigenproblems, and cross-checks the mode decomposition against
//! a direct 2-D evaluation of the second variation.

pub mod banded;
pub mod eigen;
pub mod error;
pub mod fem;
pub mod forms;
pub mod full2d_check;
pub mod mode_analysis;
pub mod model;
pub mod radial_solver;
pub mod stability_radial;

pub use error::{
    EigenError, FieldError, FormError, LinalgError, MeshError, ModelError, SolverError,
};
pub use model::{
    asymptotic_coeffs, bulk_constants, bulk_f, bulk_grad, bulk_hessian, minima_of_f,
    AsymptoticCoeffs, BulkConstants, BulkMinima, Domain, ModelParams, Regime,
};
pub use radial_solver::{Profile, SolverOptions};
