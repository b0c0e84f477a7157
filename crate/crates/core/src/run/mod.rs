//! End-to-end runs: data preparation, training, evaluation and attention
//! export driven by one [`RunConfig`].

mod checkpoint;
mod config;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, TaskCheckpoint};
pub use config::{RunConfig, SynthBlock};

use crate::data::{load_task_csv, split_table, synth_generate, Schema, SynthManifest, TaskSplits};
use crate::error::{Error, Result};
use crate::federated::{EpochRecord, Federation, MessageLog, Split, TaskEval};
use crate::metrics::{export_attention, AttentionRecord, MacroMetrics, TaskMetrics};
use crate::model::Variant;

/// Everything written to `report.json` after training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub variant: Variant,
    pub tasks: Vec<TaskMetrics>,
    pub macro_metrics: MacroMetrics,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub rounds: u64,
    pub history: Vec<EpochRecord>,
    pub wall_time_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: Variant,
    pub tasks: Vec<TaskMetrics>,
    pub macro_metrics: MacroMetrics,
}

pub struct PreparedData {
    pub splits: Vec<TaskSplits>,
    pub manifest: Option<SynthManifest>,
}

pub struct TrainOutput {
    pub report: RunReport,
    pub checkpoint: Checkpoint,
    pub log: MessageLog,
    pub manifest: Option<SynthManifest>,
}

fn schema_for(dir: &Path, stem: &str) -> Result<Schema> {
    let own = dir.join(format!("{stem}.schema.json"));
    if own.is_file() {
        Schema::load(&own)
    } else {
        Schema::load(&dir.join("schema.json"))
    }
}

/// Loads every task file of `config.dataset_dir`, or generates the
/// synthetic tasks, and splits them chronologically.
pub fn prepare_data(config: &RunConfig) -> Result<PreparedData> {
    if let Some(synth) = config.synth_config() {
        let (datasets, manifest) = synth_generate(&synth)?;
        let splits = datasets
            .iter()
            .map(|d| TaskSplits::chronological(d, &config.split))
            .collect::<Result<Vec<_>>>()?;
        return Ok(PreparedData {
            splits,
            manifest: Some(manifest),
        });
    }
    let dir = config
        .dataset_dir
        .as_ref()
        .ok_or_else(|| Error::config("dataset_dir", "missing"))?;
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut splits = Vec::new();
    for path in files {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let schema = schema_for(dir, &stem)?;
        let table = load_task_csv(&path, &schema, &config.split)?;
        if table.rows() < config.min_rows {
            log::warn!("skipping {}: {} rows < min_rows {}", path.display(), table.rows(), config.min_rows);
            continue;
        }
        let s = split_table(&table, config.window, config.stride, &config.split)?;
        for part in [&s.train, &s.val, &s.test] {
            part.validate_labels()?;
        }
        splits.push(s);
    }
    if splits.is_empty() {
        return Err(Error::Data(format!("{}: no usable task CSV files", dir.display())));
    }
    Ok(PreparedData { splits, manifest: None })
}

pub fn build_federation(config: &RunConfig, splits: Vec<TaskSplits>) -> Result<Federation> {
    Federation::new(config.federation_config(), splits)
}

/// Trains from scratch and scores the test split with the best parameters.
pub fn train(config: &RunConfig) -> Result<TrainOutput> {
    config.validate()?;
    let start = Instant::now();
    let data = prepare_data(config)?;
    let mut fed = build_federation(config, data.splits)?;
    log::info!(
        "training {} on {} tasks ({} rounds per epoch)",
        config.variant,
        fed.nodes().len(),
        fed.epoch_schedule(0).len()
    );
    let fit = fed.fit(&config.fit_options())?;
    let report = RunReport {
        config: config.clone(),
        variant: config.variant,
        tasks: fit.tasks,
        macro_metrics: fit.macro_metrics,
        best_epoch: fit.best_epoch,
        best_val_loss: fit.best_val_loss,
        epochs_run: fit.epochs_run,
        stopped_early: fit.stopped_early,
        rounds: fit.rounds,
        history: fit.history,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok(TrainOutput {
        checkpoint: Checkpoint::capture(config, &fed),
        log: fed.log().clone(),
        report,
        manifest: data.manifest,
    })
}

impl TrainOutput {
    /// Writes `report.json`, `checkpoint.json`, `messages.jsonl` and, for
    /// synthetic data, `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&dir.join("report.json"), &self.report)?;
        self.checkpoint.save(&dir.join("checkpoint.json"))?;
        self.log.write_jsonl(&dir.join("messages.jsonl"))?;
        if let Some(m) = &self.manifest {
            write_json(&dir.join("manifest.json"), m)?;
        }
        Ok(())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Rebuilds the federation described by the checkpoint's config, with data
/// from `config`, and loads the stored parameters.
pub fn restore(checkpoint: &Checkpoint, config: &RunConfig) -> Result<Federation> {
    let mut config = config.clone();
    config.validate()?;
    config.workers = config.workers.or(checkpoint.config.workers);
    let data = prepare_data(&config)?;
    let mut fed = build_federation(&config, data.splits)?;
    checkpoint.restore(&mut fed)?;
    Ok(fed)
}

pub fn evaluate(checkpoint: &Checkpoint, config: &RunConfig) -> Result<EvalReport> {
    let mut fed = restore(checkpoint, config)?;
    let (tasks, macro_metrics) = fed.test_metrics(config.threshold)?;
    Ok(EvalReport {
        variant: config.variant,
        tasks,
        macro_metrics,
    })
}

/// Attention records for the first `limit` windows of each task.
pub fn attention_records(evals: &[TaskEval], feature_names: &[Vec<String>], window: usize, limit: usize) -> Vec<AttentionRecord> {
    let mut out = Vec::new();
    for (ev, names) in evals.iter().zip(feature_names) {
        let d = names.len();
        for i in 0..ev.windows.min(limit) {
            out.push(AttentionRecord {
                task_id: ev.task_id.clone(),
                window_index: i,
                feature_names: names.clone(),
                steps: window,
                sensor_attention: ev
                    .sensor_attention
                    .as_ref()
                    .map(|a| a[i * window * d..(i + 1) * window * d].to_vec()),
                time_attention: ev.time_attention.as_ref().map(|a| a[i * window..(i + 1) * window].to_vec()),
            });
        }
    }
    out
}

/// Evaluates the test split and writes attention CSVs plus the spike
/// summary into `out_dir`.
pub fn export(checkpoint: &Checkpoint, config: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let variant = config.variant;
    if !variant.has_sensor_attention() && !variant.has_time_attention() {
        return Err(Error::Contract(format!("variant {variant} produces no attention weights")));
    }
    let mut fed = restore(checkpoint, config)?;
    let names: Vec<Vec<String>> = fed
        .nodes()
        .iter()
        .map(|n| n.split(Split::Test).feature_names.clone())
        .collect();
    let evals = fed.evaluate(Split::Test)?;
    let records = attention_records(&evals, &names, config.window, config.export_windows);
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    export_attention(&records, out_dir, config.spike_factor)
}
