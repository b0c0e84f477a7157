use super::{Normalizer, RawTable, SplitSpec, TaskDataset, TaskSplits};
use crate::error::{Error, Result};

fn windows_over(
    table: &RawTable,
    rows: std::ops::Range<usize>,
    window: usize,
    stride: usize,
    normalizer: &Normalizer,
) -> Result<TaskDataset> {
    if window == 0 || stride == 0 {
        return Err(Error::config("window/stride", "window and stride must be >= 1"));
    }
    let available = rows.len();
    if available < window {
        return Err(Error::InsufficientData {
            rows: available,
            window,
        });
    }
    let count = (available - window) / stride + 1;
    let d = table.feature_names.len();
    let mut out = TaskDataset {
        task_id: table.task_id.clone(),
        kind: table.kind,
        feature_names: table.feature_names.clone(),
        label_names: table.label_names.clone(),
        window,
        x: Vec::with_capacity(count * window * d),
        y: Vec::new(),
        positions: Vec::with_capacity(count),
    };
    for w in 0..count {
        let start = rows.start + w * stride;
        for r in start..start + window {
            let mut row = table.feature_row(r).to_vec();
            normalizer.apply(&mut row);
            out.x.extend_from_slice(&row);
        }
        out.y.extend_from_slice(table.label_row(start + window - 1));
        out.positions.push(start);
    }
    Ok(out)
}

/// Slides a `window`-row window with step `stride` over the whole table.
/// Each window is labeled with its last row's labels and standardized with
/// the table's training-split statistics.
pub fn make_windows(table: &RawTable, window: usize, stride: usize) -> Result<TaskDataset> {
    windows_over(table, 0..table.rows(), window, stride, &table.normalizer())
}

/// Splits rows chronologically, then windows each segment separately so no
/// window straddles two splits.
pub fn split_table(table: &RawTable, window: usize, stride: usize, split: &SplitSpec) -> Result<TaskSplits> {
    split.validate()?;
    let (train, val, _) = split.sizes(table.rows());
    if train != table.train_rows {
        return Err(Error::Contract(format!(
            "table was imputed with {} training rows, split gives {train}",
            table.train_rows
        )));
    }
    let normalizer = table.normalizer();
    let n = table.rows();
    Ok(TaskSplits {
        train: windows_over(table, 0..train, window, stride, &normalizer)?,
        val: windows_over(table, train..train + val, window, stride, &normalizer)?,
        test: windows_over(table, train + val..n, window, stride, &normalizer)?,
    })
}
