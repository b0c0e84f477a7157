pub mod data;
pub mod error;
pub mod federated;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod run;
pub mod seed;
pub mod tensor;

pub use error::{Error, Result};
