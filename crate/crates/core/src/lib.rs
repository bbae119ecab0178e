pub mod choi;
pub mod error;
pub mod essential;
pub mod herm;
pub mod json;
pub mod lambda;
pub mod membership;
pub mod sampling;
pub mod simplex;
pub mod spatial;
pub mod suite;
pub mod support;
pub mod witness;

pub use error::{RangeError, Result};
