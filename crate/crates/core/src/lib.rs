pub mod covariance;
pub mod error;
mod exec;
pub mod gibbs;
pub mod rng;
pub mod series;

pub use error::{Error, Result};
