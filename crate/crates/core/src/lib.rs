pub mod cli;
pub mod emd;
pub mod ensemble;
pub mod error;
pub mod mi;
pub mod noise;
pub mod pipeline;
pub mod signal;
pub mod simgen;
pub mod spectral;
pub mod spline;

pub use error::{Error, Result};
