//! The hierarchical attention model, its ablations and baselines.
//!
//! Data flow of the full model for task `k`:
//!
//! ```text
//! X(k) ─ feature attention ─ LSTM1 ─ h(k) ──┐
//!                                           ├─ concat/flatten/dense/tanh/softmax ─ a
//! X(k) ⊙ repeat(a) ─ LSTM2 ─ last step ─ FC ─ FC ─ Ŷ(k)
//! ```
//!
//! The time attention scales the *raw* inputs `X(k)`; feature attention
//! influences predictions only through the hidden states that shape `a`.

mod attention;
mod loss;
mod network;
mod variant;

pub use attention::{apply_time_attention, central_attention, sensor_attention, time_attention};
pub use loss::{loss_classification, loss_regression, task_loss};
pub use network::{
    build, forward_all, Encoded, ModelConfig, SharedModel, TaskKind, TaskModel, TaskOutput, TaskSpec,
};
pub use variant::{Topology, Variant};
