use serde::{Deserialize, Serialize};

use super::{classification_metrics, mae, smape, ClassificationReport};
use crate::error::Result;
use crate::model::TaskKind;

/// Test-set scores of one task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub task_id: String,
    pub kind: TaskKind,
    pub windows: usize,
    pub loss: f64,
    pub classification: Option<ClassificationReport>,
    pub mae: Option<f64>,
    pub smape: Option<f64>,
}

impl TaskMetrics {
    pub fn compute(
        task_id: &str,
        kind: TaskKind,
        loss: f64,
        predictions: &[f64],
        targets: &[f64],
        labels: usize,
        threshold: f64,
    ) -> Result<Self> {
        let mut m = TaskMetrics {
            task_id: task_id.to_string(),
            kind,
            windows: targets.len() / labels.max(1),
            loss,
            classification: None,
            mae: None,
            smape: None,
        };
        match kind {
            TaskKind::Classification => {
                m.classification = Some(classification_metrics(predictions, targets, labels, threshold)?)
            }
            TaskKind::Regression => {
                m.mae = Some(mae(predictions, targets)?);
                m.smape = Some(smape(predictions, targets)?);
            }
        }
        Ok(m)
    }
}

/// Unweighted means over tasks. Classification scores average only the
/// classification tasks, regression scores only the regression tasks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub loss: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub balanced_accuracy: Option<f64>,
    pub mae: Option<f64>,
    pub smape: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl MacroMetrics {
    pub fn from_tasks(tasks: &[TaskMetrics]) -> Self {
        let cls = || tasks.iter().filter_map(|t| t.classification.as_ref());
        MacroMetrics {
            loss: mean(tasks.iter().map(|t| t.loss)).unwrap_or(0.0),
            precision: mean(cls().map(|c| c.precision)),
            recall: mean(cls().map(|c| c.recall)),
            f1: mean(cls().map(|c| c.f1)),
            balanced_accuracy: mean(cls().map(|c| c.balanced_accuracy)),
            mae: mean(tasks.iter().filter_map(|t| t.mae)),
            smape: mean(tasks.iter().filter_map(|t| t.smape)),
        }
    }
}
