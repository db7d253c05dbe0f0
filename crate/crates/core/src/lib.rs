//! Triangulation-agnostic Matérn noise on triangle meshes.
//!
//! Noise is drawn by solving a screened Poisson equation
//! `(L + τM) f = √M n` with `n ~ N(0, I)`, where `M` is the lumped mass
//! matrix and `L` the cotangent Laplacian. The spectral coefficients of such
//! fields are independent with variance `1/(λ_i + τ)²`, a law that depends on
//! the eigenvalue only, so noise drawn on different triangulations of one
//! surface is statistically interchangeable.
//!
//! Modules, bottom up:
//!
//! - [`mesh`]: triangle meshes, OBJ/PLY I/O, exact refinement
//! - [`fem`]: mass matrix, cotangent Laplacian, screened operator, Γ
//! - [`linalg`]: sparse Cholesky for repeated solves, dense generalized eigensolver
//! - [`spectral`]: projections, reconstruction, the Matérn spectral law, Weyl tails
//! - [`noise`]: naïve, white, Matérn, normalized Matérn and explicit samplers
//! - [`verify`]: Monte-Carlo checks of the agnosticism properties
//! - [`flow`]: linear-path flow matching with a closed-form velocity, MMD/COV

// Negated float comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fem;
pub mod flow;
pub mod linalg;
pub mod mesh;
pub mod noise;
pub mod rng;
pub mod sparse;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use fem::{
    cotan_laplacian, lumped_mass, normalization_gamma, screened_operator, Laplacian, MassMatrix, NoiseParams,
    ScreenedOperator, Screening, DEFAULT_TAU,
};
pub use linalg::{factorize, generalized_eigs, SpdFactor, Spectrum};
pub use mesh::{TriMesh, ValidationReport};
pub use rng::RngStream;
pub use spectral::{SpectralCoeffs, VertexField};
