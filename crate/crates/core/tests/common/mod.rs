//! Shared helpers: small synthetic datasets and a single-graph reference
//! trainer used as the oracle for the federated runtime.
#![allow(dead_code)]

pub mod grad;
pub mod oracle;

use fathom_core::data::{synth_generate, SplitSpec, SynthConfig, TaskSplits};
use fathom_core::model::{build, forward_all, task_loss, ModelConfig, SharedModel, TaskKind, TaskModel, TaskSpec};
use fathom_core::nn::{Adam, AdamConfig, Mode};
use fathom_core::seed::{self, Stream};
use fathom_core::tensor::{Graph, Tensor};
use fathom_core::Result;
use rand_chacha::ChaCha8Rng;

pub fn synth_splits(
    tasks: usize,
    windows: usize,
    window: usize,
    features: usize,
    labels: usize,
    kind: TaskKind,
    seed: u64,
) -> Vec<TaskSplits> {
    let cfg = SynthConfig::new(tasks, windows, window, features, labels, kind, seed);
    let (data, _) = synth_generate(&cfg).unwrap();
    data.iter()
        .map(|d| TaskSplits::chronological(d, &SplitSpec::default()).unwrap())
        .collect()
}

/// The whole multi-task model on one graph.
pub struct Monolith {
    pub tasks: Vec<TaskModel>,
    pub shared: SharedModel,
    pub task_adam: Vec<Adam>,
    pub shared_adam: Adam,
    pub rngs: Vec<ChaCha8Rng>,
}

pub struct MonoStep {
    pub losses: Vec<f64>,
    pub task_grads: Vec<Vec<Tensor>>,
    pub shared_grads: Vec<Tensor>,
}

impl Monolith {
    pub fn new(config: &ModelConfig, specs: &[TaskSpec], seed: u64, adam: AdamConfig) -> Self {
        let (tasks, shared) = build(config, specs, seed).unwrap();
        let rngs = (0..tasks.len())
            .map(|k| seed::rng(seed, Stream::NodeDropout, k as u64))
            .collect();
        Monolith {
            task_adam: tasks.iter().map(|t| Adam::new(adam, &t.params)).collect(),
            shared_adam: Adam::new(adam, &shared.params),
            tasks,
            shared,
            rngs,
        }
    }

    /// Gradients of `(1/K) Σ_k loss_k` on one batch per task.
    pub fn gradients(&mut self, batches: &[(Tensor, Tensor)], train: bool) -> Result<MonoStep> {
        let k = self.tasks.len();
        let mut g = Graph::new();
        let bound: Vec<_> = self.tasks.iter().map(|t| t.params.bind(&mut g)).collect();
        let shared_bound = self.shared.params.bind(&mut g);
        let inputs: Vec<_> = batches.iter().map(|(x, _)| g.constant(x.clone())).collect();
        let mut modes: Vec<Mode> = if train {
            self.rngs.iter_mut().map(|r| Mode::Train(r)).collect()
        } else {
            (0..k).map(|_| Mode::Eval).collect()
        };
        let outs = forward_all(&mut g, &self.tasks, &bound, &self.shared, &shared_bound, &inputs, &mut modes)?;
        drop(modes);
        let mut losses = Vec::new();
        let mut total = None;
        for (i, out) in outs.iter().enumerate() {
            let y = g.constant(batches[i].1.clone());
            let l = task_loss(&mut g, self.tasks[i].spec.kind, out.prediction, y)?;
            losses.push(g.value(l).item());
            total = Some(match total {
                None => l,
                Some(acc) => g.add(acc, l)?,
            });
        }
        let e = g.scale(total.unwrap(), 1.0 / k as f64);
        g.backward(e)?;
        Ok(MonoStep {
            losses,
            task_grads: self
                .tasks
                .iter()
                .zip(&bound)
                .map(|(t, b)| t.params.grads(&g, b))
                .collect(),
            shared_grads: self.shared.params.grads(&g, &shared_bound),
        })
    }

    pub fn step(&mut self, batches: &[(Tensor, Tensor)]) -> Result<Vec<f64>> {
        let s = self.gradients(batches, true)?;
        if !self.shared.params.is_empty() {
            self.shared_adam.step(&mut self.shared.params, &s.shared_grads)?;
        }
        for ((t, a), gr) in self.tasks.iter_mut().zip(&mut self.task_adam).zip(&s.task_grads) {
            a.step(&mut t.params, gr)?;
        }
        Ok(s.losses)
    }
}

pub fn specs_of(splits: &[TaskSplits]) -> Vec<TaskSpec> {
    splits
        .iter()
        .map(|s| TaskSpec {
            features: s.train.features(),
            labels: s.train.labels(),
            kind: s.train.kind,
        })
        .collect()
}

/// Batches for schedule positions, cycling shorter tasks.
pub fn batches_at(splits: &[TaskSplits], positions: &[usize]) -> Vec<(Tensor, Tensor)> {
    splits
        .iter()
        .map(|s| {
            let n = s.train.len();
            let idx: Vec<usize> = positions.iter().map(|p| p % n).collect();
            s.train.batch(&idx).unwrap()
        })
        .collect()
}

pub fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.dims(), b.dims());
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
