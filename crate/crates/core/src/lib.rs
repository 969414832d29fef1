pub mod cli;
pub mod corpus;
pub mod digest;
pub mod error;
pub mod evaluation;
pub mod generation;
pub mod metrics;
pub mod parsing;
pub mod prompting;
pub mod provider;
pub mod sampling;
pub mod taxonomy;

pub use error::{Error, Result};
