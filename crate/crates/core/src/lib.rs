//! Low-rank compression of weight matrices with randomized subspace
//! iteration.
//!
//! The crate is organized bottom-up:
//!
//! - [`matrix`], [`qr`], [`svd`], [`norm`]: dense numerical substrate.
//! - [`randomized`]: randomized SVD / subspace iteration, factor splitting
//!   and the normalized spectral error metric.
//! - [`spectra`]: synthetic matrices with prescribed singular values.
//! - [`planner`]: rank selection and parameter accounting for whole models.
//! - [`softmax`]: softmax, its Jacobian and the probability perturbation bound.
//! - [`npy`], [`io`]: NPY and JSON interchange.
//! - [`workflow`]: the end-to-end procedures behind the command line.

pub mod error;
pub mod io;
pub mod matrix;
pub mod norm;
pub mod npy;
pub mod planner;
pub mod qr;
pub mod randomized;
pub mod softmax;
pub mod spectra;
pub mod svd;
pub mod workflow;

pub use error::{Error, NpyError, Result};
pub use matrix::{gaussian_matrix, DenseMatrix, Difference, LinearOperator, RngSeed};
pub use norm::spectral_norm;
pub use qr::qr_orthonormalize;
pub use randomized::{
    normalized_spectral_error, rsi, rsvd, split_factors, truncate_svd, ApproximationReport,
    LowRankFactors, RsiConfig,
};
pub use svd::{exact_svd, singular_values, SvdFactors};
