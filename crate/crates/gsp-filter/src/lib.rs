//! Mean-square optimal linear filtering for generalized stochastic processes.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod gabor;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod sim;
pub mod solvers;
pub mod spectral;
pub mod symbol_matrix;
pub mod weyl;

pub use error::{GspError, Result};
pub use grid::{Domain, Grid, GridFunction};
pub use num_complex::Complex64 as C64;
