//! Simulated synchronous federation: task nodes keep their windows and
//! parameters, a coordinator owns the shared parameters, and the two only
//! exchange [`RoundMessage`]s.
//!
//! One training round of the full model:
//!
//! ```text
//! node k:  X ─ encode ─ h(k)                    ──▶ coordinator
//! coord:   [h(1)..h(K)] ─ time attention ─ a    ──▶ every node
//! node k:  decode(X, a) ─ loss/K ─ backward ─ ∂/∂a ──▶ coordinator
//! coord:   Σ_k ∂/∂a ─ backward ─ ∂/∂h(k)         ──▶ node k
//! node k:  finish backward, Adam on local params; coord: Adam on scorer
//! ```

mod coordinator;
mod message;
mod node;
mod runtime;

pub use coordinator::Coordinator;
pub use message::{contains_f64, Direction, MessageLog, MessageRecord, Payload, RoundMessage};
pub use node::{Phase, Split, StepResult, TaskNode};
pub use runtime::{
    EpochRecord, Federation, FederationConfig, FitOptions, RoundGradients, TaskEval, TrainingReport,
};
