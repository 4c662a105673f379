//! Linear algebra kernels used across the pipeline.

pub mod banded;
pub mod dense;
pub mod tridiag;

pub use banded::{BandLu, BandMatrix};
pub use dense::DenseMatrix;
pub use tridiag::SymTridiag;
