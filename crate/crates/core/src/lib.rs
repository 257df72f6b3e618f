pub mod cli;
pub mod datasets;
pub mod detector;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod seed;
pub mod profile;
pub mod solver;

pub use error::{Error, Result};
