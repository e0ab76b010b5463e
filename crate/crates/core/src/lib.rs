pub mod baseline;
pub mod checks;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod inference;
pub mod manifold;
pub mod metrics;
pub mod path;
pub mod posterior;
pub mod quadrature;

pub use error::{Error, Result};
