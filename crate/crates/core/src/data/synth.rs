//! Synthetic multi-task generator with known ground truth.
//!
//! Every window carries a square pulse (the trigger) whose phase is shared by
//! all tasks at the same window index. Each task has a private set of
//! informative features that are non-zero only while the trigger is on; all
//! other features are unit Gaussian distractors. A window's score is the
//! label-weighted mean of its informative values over the trigger steps
//! inside the window. Classification labels threshold the score at its
//! per-label median; regression labels are the score plus Gaussian noise.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::TaskDataset;
use crate::error::{Error, Result};
use crate::model::TaskKind;
use crate::seed::{self, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    /// Number of tasks (K).
    pub tasks: usize,
    /// Windows generated per task.
    pub windows: usize,
    /// Time steps per window (T).
    pub window: usize,
    /// Features per task (D, at least 4).
    pub features: usize,
    /// Labels per task (M).
    pub labels: usize,
    pub kind: TaskKind,
    pub seed: u64,
    /// Trigger length in steps.
    #[serde(default = "default_pulse")]
    pub pulse_width: usize,
    /// Gaussian noise added to informative features.
    #[serde(default = "default_feature_noise")]
    pub feature_noise: f64,
    /// Gaussian noise added to regression targets.
    #[serde(default = "default_label_noise")]
    pub label_noise: f64,
}

fn default_pulse() -> usize {
    4
}

fn default_feature_noise() -> f64 {
    0.3
}

fn default_label_noise() -> f64 {
    0.1
}

impl SynthConfig {
    pub fn new(tasks: usize, windows: usize, window: usize, features: usize, labels: usize, kind: TaskKind, seed: u64) -> Self {
        SynthConfig {
            tasks,
            windows,
            window,
            features,
            labels,
            kind,
            seed,
            pulse_width: default_pulse(),
            feature_noise: default_feature_noise(),
            label_noise: default_label_noise(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("synth.tasks", self.tasks),
            ("synth.windows", self.windows),
            ("synth.window", self.window),
            ("synth.labels", self.labels),
            ("synth.pulse_width", self.pulse_width),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::config(field, "must be >= 1"));
            }
        }
        if self.features < 4 {
            return Err(Error::config("synth.features", "must be >= 4"));
        }
        for (field, v) in [("synth.feature_noise", self.feature_noise), ("synth.label_noise", self.label_noise)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(field, "must be a non-negative number"));
            }
        }
        Ok(())
    }

    pub fn informative_count(&self) -> usize {
        self.features.div_ceil(4)
    }
}

/// Ground truth recorded alongside generated data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub config: SynthConfig,
    /// Informative feature indices per task, ascending.
    pub informative: Vec<Vec<usize>>,
    /// `[task][label][j]` weight of the `j`-th informative feature.
    pub label_weights: Vec<Vec<Vec<f64>>>,
    /// Trigger start per window; may lie outside `[0, T)`, in which case
    /// the window sees only part or none of the pulse.
    pub trigger_phases: Vec<i64>,
    /// `[task][label]` classification threshold (score median).
    pub thresholds: Vec<Vec<f64>>,
}

impl SynthManifest {
    /// Whether step `t` of window `i` is inside the trigger.
    pub fn trigger_on(&self, i: usize, t: usize) -> bool {
        let p = self.trigger_phases[i];
        let t = t as i64;
        t >= p && t < p + self.config.pulse_width as i64
    }

    /// Number of trigger steps inside window `i`.
    pub fn overlap(&self, i: usize) -> usize {
        (0..self.config.window).filter(|&t| self.trigger_on(i, t)).count()
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Generates `config.tasks` datasets and their manifest.
pub fn synth_generate(config: &SynthConfig) -> Result<(Vec<TaskDataset>, SynthManifest)> {
    config.validate()?;
    let (k, n, t, d, m) = (config.tasks, config.windows, config.window, config.features, config.labels);
    let width = config.pulse_width as i64;
    let mut shared = seed::rng(config.seed, Stream::Synth, u64::MAX);
    let trigger_phases: Vec<i64> = (0..n).map(|_| shared.gen_range(-width..=t as i64)).collect();

    let mut informative = Vec::with_capacity(k);
    let mut label_weights = Vec::with_capacity(k);
    let mut thresholds = Vec::with_capacity(k);
    let mut datasets = Vec::with_capacity(k);
    let count = config.informative_count();

    for task in 0..k {
        let mut rng = seed::rng(config.seed, Stream::Synth, task as u64);
        let mut picked = sample(&mut rng, d, count).into_vec();
        picked.sort_unstable();
        let weights: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..count).map(|_| rng.gen_range(0.5..1.5)).collect())
            .collect();

        let mut x = vec![0.0; n * t * d];
        let mut scores = vec![0.0; n * m];
        for i in 0..n {
            let amplitude: Vec<f64> = (0..count).map(|_| rng.gen_range(0.5..1.5)).collect();
            let p = trigger_phases[i];
            for step in 0..t {
                let on = (step as i64) >= p && (step as i64) < p + width;
                let row = &mut x[(i * t + step) * d..(i * t + step + 1) * d];
                for (f, cell) in row.iter_mut().enumerate() {
                    let noise: f64 = rng.sample(StandardNormal);
                    *cell = match picked.binary_search(&f) {
                        Ok(j) => (if on { amplitude[j] } else { 0.0 }) + config.feature_noise * noise,
                        Err(_) => noise,
                    };
                }
                if on {
                    for (label, w) in weights.iter().enumerate() {
                        let s: f64 = w.iter().zip(&amplitude).map(|(w, a)| w * a).sum();
                        scores[i * m + label] += s / (width as f64 * count as f64);
                    }
                }
            }
        }

        let task_thresholds: Vec<f64> = (0..m)
            .map(|label| median(&(0..n).map(|i| scores[i * m + label]).collect::<Vec<_>>()))
            .collect();
        let y: Vec<f64> = match config.kind {
            TaskKind::Classification => scores
                .iter()
                .enumerate()
                .map(|(idx, &s)| if s > task_thresholds[idx % m] { 1.0 } else { 0.0 })
                .collect(),
            TaskKind::Regression => scores
                .iter()
                .map(|&s| s + config.label_noise * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        };

        datasets.push(TaskDataset {
            task_id: format!("task{task}"),
            kind: config.kind,
            feature_names: (0..d).map(|f| format!("f{f}")).collect(),
            label_names: (0..m).map(|l| format!("y{l}")).collect(),
            window: t,
            x,
            y,
            positions: (0..n).collect(),
        });
        informative.push(picked);
        label_weights.push(weights);
        thresholds.push(task_thresholds);
    }

    let manifest = SynthManifest {
        config: config.clone(),
        informative,
        label_weights,
        trigger_phases,
        thresholds,
    };
    Ok((datasets, manifest))
}
