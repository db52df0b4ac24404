//! Multiscale analysis on finite quasi-metric measure spaces.
//!
//! The pipeline runs [`space`] → [`dyadic`] → [`wavelets`], after which
//! [`squares`] computes one-parameter Littlewood–Paley quantities and
//! [`product`] / [`czd`] work on the tensor product of two spaces.

pub mod czd;
pub mod dyadic;
pub mod error;
pub mod fixtures;
pub mod product;
pub mod space;
pub mod spacefile;
pub mod squares;
pub mod verify;
pub mod wavelets;

pub use error::{Error, Result};
pub use space::FiniteSpace;
pub use wavelets::Signal;

/// Library version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
