//! Dense linear algebra used by the solvers: column-major matrices,
//! Cholesky factorization, support-restricted least squares and power
//! iteration for extremal eigenvalues.

mod eigen;
mod factor;
pub mod io;
mod matrix;

pub use eigen::{
    extreme_eigenvalues, extreme_eigenvalues_with, spectral_norm, POWER_MAX_ITER, POWER_TOL,
};
pub use factor::{
    cholesky, cholesky_with_ridge, restricted_least_squares, spd_inverse, Cholesky,
    LeastSquaresFit, GRAM_RIDGE,
};
pub use matrix::{dot, norm2, norm_inf, DenseMatrix, DenseVector, IndexSet};
