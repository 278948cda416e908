//! Dense linear algebra, deterministic random streams and spectral estimates
//! shared by the rest of the toolkit.

mod matrix;
mod rng;
mod scalar;
mod spectral;
pub mod vector;

pub use matrix::DenseMatrix;
pub use rng::{gauss_vec, splitmix64, RngStream};
pub use scalar::Real;
pub use spectral::{
    max_eig_sym, min_eig_sym, spectral_norm, sym_eigenvalues, POWER_ITERATION_CAP, SYMMETRY_TOL,
};
