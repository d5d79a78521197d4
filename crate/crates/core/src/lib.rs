//! Noncommutative polynomial optimization with constant-trace certificates.

pub mod cgal;
pub mod ctp;
pub mod eig;
pub mod error;
pub mod free_algebra;
pub mod generator;
pub mod instance;
pub mod lp;
pub mod pipeline;
pub mod relaxation;
pub mod sampling;
pub mod sparsity;
pub mod standard_form;

pub use error::{Error, Result};
pub use free_algebra::{NcPolynomial, SymmetryMode, Word};
pub use relaxation::{Problem, Relaxation};
