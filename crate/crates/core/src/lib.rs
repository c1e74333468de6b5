//! Model-based clustering with generalized hyperbolic and skew-t mixtures
//! on data with missing values.

pub mod distributions;
pub mod em;
pub mod error;
pub mod gpcm;
pub mod linalg;
pub mod missing;
pub mod selection;
pub mod simulation;
pub mod special;

pub use error::{Error, Result};
