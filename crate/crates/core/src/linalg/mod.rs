//! Sparse Cholesky for the screened operator and a dense generalized
//! eigensolver for verification-scale meshes.

mod cholesky;
mod eigen;

pub use cholesky::{factorization_count, factorize, SpdFactor};
pub use eigen::{generalized_eigs, Spectrum, DENSE_LIMIT};
