//! Trainable layers, initialization and the Adam optimizer.

mod adam;
mod dense;
mod dropout;
mod init;
mod lstm;
mod params;

pub use adam::{Adam, AdamConfig};
pub use dense::{Activation, Dense};
pub use dropout::{dropout_mask, Mode};
pub use init::Initializer;
pub use lstm::{Lstm, GATES};
pub use params::{Bound, ParamEntry, ParamId, ParamStore};
