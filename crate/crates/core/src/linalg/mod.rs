//! Small dense complex linear algebra: matrices, seeded Gaussian sampling,
//! least squares and Cholesky.

mod matrix;
mod rng;
mod solve;

pub use matrix::ComplexMatrix;
pub use num_complex::Complex64;
pub use rng::{complex_gaussian, Rng};
pub use solve::{cholesky_factor, ls_solve};
