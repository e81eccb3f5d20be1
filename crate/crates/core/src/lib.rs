pub mod error;
pub mod numerics;

pub use error::{Error, Result};
pub mod model;
pub mod posterior;
pub mod risk;
pub mod multiplicity;
pub mod sim;
pub mod microarray;
