use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TaskKind;
use crate::tensor::Tensor;

/// Windowed series of one task: `x` is `[len, window, features]` and `y` is
/// `[len, labels]`, both row-major. A dataset may be empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskDataset {
    pub task_id: String,
    pub kind: TaskKind,
    pub feature_names: Vec<String>,
    pub label_names: Vec<String>,
    pub window: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Source position (row offset or window index) of each window, in order.
    pub positions: Vec<usize>,
}

impl TaskDataset {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn labels(&self) -> usize {
        self.label_names.len()
    }

    fn window_stride(&self) -> usize {
        self.window * self.features()
    }

    pub fn window_x(&self, i: usize) -> &[f64] {
        let s = self.window_stride();
        &self.x[i * s..(i + 1) * s]
    }

    pub fn window_y(&self, i: usize) -> &[f64] {
        let m = self.labels();
        &self.y[i * m..(i + 1) * m]
    }

    /// Gathers windows into `([batch, T, D], [batch, M])` tensors.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Tensor)> {
        if indices.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        let mut x = Vec::with_capacity(indices.len() * self.window_stride());
        let mut y = Vec::with_capacity(indices.len() * self.labels());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Contract(format!(
                    "window {i} out of range for task `{}` with {} windows",
                    self.task_id,
                    self.len()
                )));
            }
            x.extend_from_slice(self.window_x(i));
            y.extend_from_slice(self.window_y(i));
        }
        Ok((
            Tensor::new(vec![indices.len(), self.window, self.features()], x)?,
            Tensor::new(vec![indices.len(), self.labels()], y)?,
        ))
    }

    /// Windows `[start, end)` as a new dataset.
    pub fn slice(&self, start: usize, end: usize) -> TaskDataset {
        let s = self.window_stride();
        let m = self.labels();
        TaskDataset {
            x: self.x[start * s..end * s].to_vec(),
            y: self.y[start * m..end * m].to_vec(),
            positions: self.positions[start..end].to_vec(),
            ..self.empty_like()
        }
    }

    /// A dataset with the same metadata and no windows.
    pub fn empty_like(&self) -> TaskDataset {
        TaskDataset {
            task_id: self.task_id.clone(),
            kind: self.kind,
            feature_names: self.feature_names.clone(),
            label_names: self.label_names.clone(),
            window: self.window,
            x: Vec::new(),
            y: Vec::new(),
            positions: Vec::new(),
        }
    }

    pub(crate) fn validate_labels(&self) -> Result<()> {
        if self.kind == TaskKind::Classification {
            if let Some(bad) = self.y.iter().find(|&&v| v != 0.0 && v != 1.0) {
                return Err(Error::Data(format!(
                    "task `{}`: classification label {bad} is not 0 or 1",
                    self.task_id
                )));
            }
        }
        if self.x.iter().chain(&self.y).any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("task `{}` contains non-finite values", self.task_id)));
        }
        Ok(())
    }
}

/// Fractions of a chronological train/validation/test split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|&f| !(0.0..=1.0).contains(&f) || !f.is_finite()) {
            return Err(Error::config("split", "fractions must lie in [0, 1]"));
        }
        if ((parts.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::config("split", "fractions must sum to 1"));
        }
        Ok(())
    }

    /// Segment sizes `(train, val, test)` for `n` items: train and val are
    /// floored, test takes the remainder so the split is exhaustive.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let train = (self.train * n as f64).floor() as usize;
        let val = ((self.val * n as f64).floor() as usize).min(n - train);
        (train, val, n - train - val)
    }
}

/// One task's chronological splits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSplits {
    pub train: TaskDataset,
    pub val: TaskDataset,
    pub test: TaskDataset,
}

impl TaskSplits {
    /// Splits already-windowed data by window order.
    pub fn chronological(dataset: &TaskDataset, split: &SplitSpec) -> Result<Self> {
        split.validate()?;
        let (train, val, _) = split.sizes(dataset.len());
        Ok(TaskSplits {
            train: dataset.slice(0, train),
            val: dataset.slice(train, train + val),
            test: dataset.slice(train + val, dataset.len()),
        })
    }

    pub fn task_id(&self) -> &str {
        &self.train.task_id
    }
}
