use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Confusion {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// `(TPR + TNR) / 2`; a rate whose class is absent contributes zero.
    pub fn balanced_accuracy(&self) -> f64 {
        (self.recall() + ratio(self.tn, self.tn + self.fp)) / 2.0
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub balanced_accuracy: f64,
    pub confusion: Confusion,
}

impl From<Confusion> for LabelScores {
    fn from(c: Confusion) -> Self {
        LabelScores {
            precision: c.precision(),
            recall: c.recall(),
            f1: c.f1(),
            balanced_accuracy: c.balanced_accuracy(),
            confusion: c,
        }
    }
}

/// Per-label scores plus their unweighted (macro) means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub per_label: Vec<LabelScores>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub balanced_accuracy: f64,
}

impl ClassificationReport {
    pub fn from_confusions(confusions: &[Confusion]) -> Self {
        let per_label: Vec<LabelScores> = confusions.iter().copied().map(Into::into).collect();
        let mean = |f: fn(&LabelScores) -> f64| {
            if per_label.is_empty() {
                0.0
            } else {
                per_label.iter().map(f).sum::<f64>() / per_label.len() as f64
            }
        };
        ClassificationReport {
            precision: mean(|s| s.precision),
            recall: mean(|s| s.recall),
            f1: mean(|s| s.f1),
            balanced_accuracy: mean(|s| s.balanced_accuracy),
            per_label,
        }
    }
}

/// Scores `probs` against binary `truth`, both `[N, M]` row-major with
/// `labels = M` columns; a prediction is positive when `prob >= threshold`.
pub fn classification_metrics(probs: &[f64], truth: &[f64], labels: usize, threshold: f64) -> Result<ClassificationReport> {
    if probs.len() != truth.len() || labels == 0 || probs.len() % labels != 0 {
        return Err(Error::dim("classification_metrics", &[probs.len()], &[truth.len(), labels]));
    }
    let mut confusions = vec![Confusion::default(); labels];
    for (i, (&p, &y)) in probs.iter().zip(truth).enumerate() {
        let positive = match y {
            v if v == 1.0 => true,
            v if v == 0.0 => false,
            other => return Err(Error::Data(format!("label {other} is not 0 or 1"))),
        };
        let c = &mut confusions[i % labels];
        match (p >= threshold, positive) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(ClassificationReport::from_confusions(&confusions))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let y = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
        let r = classification_metrics(&y, &y, 2, 0.5).unwrap();
        assert_eq!((r.precision, r.recall, r.f1, r.balanced_accuracy), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn all_negative_on_balanced_labels() {
        let y = [1.0, 0.0, 1.0, 0.0];
        let r = classification_metrics(&[0.1; 4], &y, 1, 0.5).unwrap();
        assert_eq!(r.recall, 0.0);
        assert_eq!(r.balanced_accuracy, 0.5);
    }

    #[test]
    fn hand_confusion_matrix() {
        let c = Confusion { tp: 3, fp: 1, fn_: 2, tn: 4 };
        assert_eq!(c.precision(), 0.75);
        assert_eq!(c.recall(), 0.6);
        assert!((c.f1() - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.balanced_accuracy() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn counts_sum_to_rows() {
        let probs = [0.9, 0.2, 0.7, 0.4, 0.1, 0.8];
        let y = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let r = classification_metrics(&probs, &y, 2, 0.5).unwrap();
        assert!(r.per_label.iter().all(|s| s.confusion.total() == 3));
    }

    #[test]
    fn rejects_non_binary_truth() {
        assert!(matches!(classification_metrics(&[0.5], &[0.5], 1, 0.5), Err(Error::Data(_))));
    }
}
