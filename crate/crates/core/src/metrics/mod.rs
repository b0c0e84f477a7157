//! Evaluation metrics and attention export.

mod classification;
mod export;
mod regression;
mod summary;

pub use classification::{classification_metrics, ClassificationReport, Confusion, LabelScores};
pub use export::{export_attention, find_spikes, AttentionRecord, Spike};
pub use regression::{mae, smape};
pub use summary::{MacroMetrics, TaskMetrics};
