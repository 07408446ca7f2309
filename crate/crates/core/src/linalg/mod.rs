//! Arbitrary-precision scalars, dense matrices and the spectral routines built on them.

pub mod eigen;
pub mod matrix;
pub mod scalar;
pub mod skew;
pub mod spectral;

pub use eigen::{jacobi_eigen_sym, SymmetricEigen};
pub use matrix::BigMatrix;
pub use scalar::{to_decimal, BigReal, Precision};
pub use skew::{skew_canonical_form, SkewCanonical};
pub use spectral::{artanh_sym, tanh_sym, Artanh};
