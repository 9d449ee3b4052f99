pub mod bernstein;
pub mod bounds;
pub mod cli;
pub mod criteria;
pub mod defaults;
pub mod density;
pub mod error;
pub mod experiments;
pub mod levy;
pub mod quadrature;
pub mod simulate;
pub mod spectrum;

pub use error::{Error, Result};
