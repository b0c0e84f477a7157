use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Attention of one window of one task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub task_id: String,
    pub window_index: usize,
    pub feature_names: Vec<String>,
    pub steps: usize,
    /// `[T, D]` row-major feature attention, when the model has it.
    pub sensor_attention: Option<Vec<f64>>,
    /// `[T]` time attention, when the model has it.
    pub time_attention: Option<Vec<f64>>,
}

impl AttentionRecord {
    pub fn features(&self) -> usize {
        self.feature_names.len()
    }

    fn file_name(&self) -> String {
        let prefix = if self.sensor_attention.is_some() {
            "attention"
        } else {
            "time_attention"
        };
        format!("{prefix}_{}_w{:05}.csv", self.task_id, self.window_index)
    }
}

/// A feature-attention weight above the spike threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub task_id: String,
    pub window_index: usize,
    pub time: usize,
    pub feature: String,
    pub weight: f64,
}

/// Feature-attention entries strictly greater than `factor / D`.
pub fn find_spikes(records: &[AttentionRecord], factor: f64) -> Vec<Spike> {
    let mut spikes = Vec::new();
    for r in records {
        let Some(a) = &r.sensor_attention else { continue };
        let d = r.features();
        let threshold = factor / d as f64;
        for t in 0..r.steps {
            for f in 0..d {
                let w = a[t * d + f];
                if w > threshold {
                    spikes.push(Spike {
                        task_id: r.task_id.clone(),
                        window_index: r.window_index,
                        time: t,
                        feature: r.feature_names[f].clone(),
                        weight: w,
                    });
                }
            }
        }
    }
    spikes
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Writes one CSV per record (rows are time steps; columns are the features
/// followed by `time_attention` when present) and `spikes.csv` listing
/// feature-attention weights above `spike_factor / D`. Returns the written
/// paths, spike summary last.
pub fn export_attention(records: &[AttentionRecord], out_dir: &Path, spike_factor: f64) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::Contract("no attention records to export".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::with_capacity(records.len() + 1);
    for r in records {
        let d = r.features();
        let mut header: Vec<String> = vec!["time".into()];
        if r.sensor_attention.is_some() {
            header.extend(r.feature_names.iter().cloned());
        }
        if r.time_attention.is_some() {
            header.push("time_attention".into());
        }
        let mut body = header.join(",");
        body.push('\n');
        for t in 0..r.steps {
            let mut cells = vec![t.to_string()];
            if let Some(a) = &r.sensor_attention {
                cells.extend(a[t * d..(t + 1) * d].iter().map(|v| v.to_string()));
            }
            if let Some(a) = &r.time_attention {
                cells.push(a[t].to_string());
            }
            body.push_str(&cells.join(","));
            body.push('\n');
        }
        let path = out_dir.join(r.file_name());
        write_file(&path, &body)?;
        written.push(path);
    }
    let mut summary = String::from("task,window,time,feature,weight\n");
    for s in find_spikes(records, spike_factor) {
        summary.push_str(&format!("{},{},{},{},{}\n", s.task_id, s.window_index, s.time, s.feature, s.weight));
    }
    let path = out_dir.join("spikes.csv");
    write_file(&path, &summary)?;
    written.push(path);
    Ok(written)
}
