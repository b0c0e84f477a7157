//! Task data: CSV ingestion, windowing, chronological splits and the
//! synthetic generator.

mod dataset;
mod synth;
mod table;
mod window;

pub use dataset::{SplitSpec, TaskDataset, TaskSplits};
pub use synth::{synth_generate, SynthConfig, SynthManifest};
pub use table::{load_task_csv, Normalizer, RawTable, Schema};
pub use window::{make_windows, split_table};
