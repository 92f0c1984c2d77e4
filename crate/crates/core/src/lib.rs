pub mod distributions;
pub mod error;
pub mod identify;
pub mod models;
pub mod polyhedra;
pub mod randomsets;
pub mod scalar;
pub mod simulate;
pub mod symbolic;
pub mod tables;

pub use error::{Error, Result};
pub use scalar::{Bound, Rational};
