//! Dense linear algebra for the small matrices used throughout the crate.

mod decomp;
mod eigen;
mod equations;
mod kron;
mod matrix;

pub use decomp::{
    cholesky, cholesky_solve, inverse, lstsq, lstsq_ridge, solve, solve_normal_equations,
    solve_right, Lu, MAX_GRAM_CONDITION,
};
pub use eigen::{
    eigenvalues, min_eigenvalue, psd_sqrt, spectral_radius, symmetric_eigen, symmetric_pinv,
};
pub use equations::{kalman_gain, lyapunov_residual, riccati_residual, solve_dare, solve_lyapunov};
pub use kron::{commutation, downshift, kron, ones, vec};
pub use matrix::Matrix;
