//! Schwinger-Dyson and signature kernels of piecewise-linear rough paths.

pub mod bench;
pub mod error;
pub mod nc;
pub mod noise;
pub mod oracles;
pub mod rough_path;
pub mod sigkernel;
pub mod solver;
pub mod words;

pub use error::{Error, Result};
