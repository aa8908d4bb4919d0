//! Numerical toolkit for finite-dimensional operator spaces: row, column and
//! operator Hilbert space level norms, complex interpolation with certified
//! bounds, Haagerup and oh tensor norms, completely bounded norm estimates,
//! and reproducible verification checks.

pub mod error;
pub mod interp;
pub mod linalg;
mod opt;
pub mod spaces;
pub mod tensorcb;
pub mod verify;
pub mod cli;

pub use error::{Error, Result};
pub use linalg::{CMatrix, HermitianPD, C64};
pub use spaces::{MatrixTuple, SolverParams, SpaceStructure};
