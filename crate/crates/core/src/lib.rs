pub mod error;
pub mod linop;
pub mod metrics;
pub mod seed;
pub mod solver;
pub mod synthetic;
pub mod tssp;
pub mod wavelet;

pub use error::{Error, Result};
