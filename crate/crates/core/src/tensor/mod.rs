//! Dense `f64` tensors and the reverse-mode tape that differentiates them.
//!
//! All storage is row-major: element `(i, j, k)` of a `[a, b, c]` tensor sits
//! at flat index `i*b*c + j*c + k`. Exported attention matrices rely on this
//! order.

mod graph;
mod shape;
mod value;

pub mod gradcheck;

pub use graph::{Graph, Var};
#[cfg(test)]
pub(crate) use graph::sigmoid;
pub use shape::Shape;
pub use value::Tensor;
