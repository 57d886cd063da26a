pub mod error;
pub mod estimator;
pub mod generate;
pub mod hrg;
pub mod index;
pub mod model;
pub mod morton;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod sink;

mod engine;
mod filter;

pub use error::{Error, Result};
