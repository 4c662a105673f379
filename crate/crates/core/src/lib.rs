//! Excited standing waves of the radial cubic-type NLS in three dimensions:
//! profiles, linearized spectra and signatures, Fermi Golden Rule
//! coefficients and instability dynamics.

pub mod dynamics;
pub mod error;
pub mod fgr;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod nonlinearity;
pub mod operators;
pub mod profile;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{GridSpec, RadialGrid};
pub use nonlinearity::Nonlinearity;
pub use operators::{LinearizedOperator, PotentialPerturbation, ScalarOperator, Spinor};
pub use profile::{Profile, ProfileConfig};
