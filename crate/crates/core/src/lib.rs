//! Explicit Laplace eigenmodes on model domains (interval, Dirichlet boxes,
//! flat tori), tubular neighborhoods of their nodal sets, subdivision
//! statistics, and approximation of points by nodal sets.
//!
//! The crate is organized bottom-up:
//!
//! * [`spectrum`] enumerates and evaluates separable eigenmodes.
//! * [`nodal_geom`] samples modes on lattices, extracts nodal sets, builds
//!   exact distance fields and measures tubes.
//! * [`boxes`] implements box subdivisions, comparability sets and good/bad
//!   box statistics.
//! * [`diophantine`] holds continued fractions, nearest-nodal distances and
//!   approximation-exponent estimates.
//! * [`harness`] runs whole experiments and emits JSON/CSV reports.

pub mod boxes;
pub mod cache;
pub mod diophantine;
mod error;
pub mod harness;
pub mod nodal_geom;
pub mod spectrum;

pub use error::{Error, Result};
