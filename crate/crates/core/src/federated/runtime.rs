use rand::seq::SliceRandom;
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use super::coordinator::Coordinator;
use super::message::{MessageLog, RoundMessage};
use super::node::{Phase, Split, StepResult, TaskNode};
use crate::data::TaskSplits;
use crate::error::{Error, Result};
use crate::metrics::{MacroMetrics, TaskMetrics};
use crate::model::{build, task_loss, ModelConfig, TaskKind, TaskSpec, Topology, Variant};
use crate::nn::{AdamConfig, ParamStore};
use crate::seed::{self, Stream};
use crate::tensor::{Graph, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    pub model: ModelConfig,
    pub adam: AdamConfig,
    pub batch_size: usize,
    /// Worker threads for node computation; `None` means one per node.
    pub workers: Option<usize>,
    pub seed: u64,
    /// Keep raw bytes of every coordinator-bound message for auditing.
    pub capture_uplink: bool,
}

impl FederationConfig {
    pub fn new(model: ModelConfig, seed: u64) -> Self {
        FederationConfig {
            model,
            adam: AdamConfig::default(),
            batch_size: 60,
            workers: None,
            seed,
            capture_uplink: false,
        }
    }
}

/// Gradients of one round, before any optimizer step.
#[derive(Clone, Debug)]
pub struct RoundGradients {
    pub results: Vec<StepResult>,
    /// Per node, in the order of its parameter store.
    pub nodes: Vec<Vec<Tensor>>,
    /// Coordinator parameters, in store order; empty when nothing is shared.
    pub shared: Vec<Tensor>,
}

/// Predictions of one task over a whole split, in window order.
#[derive(Clone, Debug)]
pub struct TaskEval {
    pub task_id: String,
    pub kind: TaskKind,
    pub labels: usize,
    pub windows: usize,
    pub loss: f64,
    /// `[windows, M]` row-major.
    pub predictions: Vec<f64>,
    pub targets: Vec<f64>,
    /// `[windows, T, D]` row-major.
    pub sensor_attention: Option<Vec<f64>>,
    /// `[windows, T]` row-major.
    pub time_attention: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_epochs: usize,
    pub patience: usize,
    pub threshold: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_epochs: 200,
            patience: 20,
            threshold: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub variant: Variant,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
    pub rounds: u64,
    pub history: Vec<EpochRecord>,
    pub tasks: Vec<TaskMetrics>,
    pub macro_metrics: MacroMetrics,
}

/// K task nodes and one coordinator exchanging messages in synchronous
/// rounds.
pub struct Federation {
    nodes: Vec<TaskNode>,
    coordinator: Coordinator,
    pool: ThreadPool,
    log: MessageLog,
    round: u64,
    config: FederationConfig,
}

fn par_each<T, F>(pool: &ThreadPool, nodes: &mut [TaskNode], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut TaskNode) -> Result<T> + Sync + Send,
{
    pool.install(|| nodes.par_iter_mut().map(f).collect())
}

fn par_with<T, F>(pool: &ThreadPool, nodes: &mut [TaskNode], msgs: Vec<RoundMessage>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut TaskNode, RoundMessage) -> Result<T> + Sync + Send,
{
    pool.install(|| {
        nodes
            .par_iter_mut()
            .zip(msgs.into_par_iter())
            .map(|(n, m)| f(n, m))
            .collect()
    })
}

impl Federation {
    pub fn new(config: FederationConfig, splits: Vec<TaskSplits>) -> Result<Self> {
        if splits.is_empty() {
            return Err(Error::config("tasks", "at least one task is required"));
        }
        if config.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        let specs: Vec<TaskSpec> = splits
            .iter()
            .map(|s| TaskSpec {
                features: s.train.features(),
                labels: s.train.labels(),
                kind: s.train.kind,
            })
            .collect();
        for s in &splits {
            if s.train.window != config.model.window {
                return Err(Error::config(
                    "window",
                    format!("task {} has windows of {} steps, model expects {}", s.task_id(), s.train.window, config.model.window),
                ));
            }
        }
        let (models, shared) = build(&config.model, &specs, config.seed)?;
        let k = splits.len();
        let workers = config.workers.unwrap_or(k).max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Contract(format!("thread pool: {e}")))?;
        let nodes = splits
            .into_iter()
            .zip(models)
            .enumerate()
            .map(|(id, (data, model))| TaskNode::new(id, data, model, &shared, config.adam, config.seed))
            .collect();
        Ok(Federation {
            coordinator: Coordinator::new(shared, k, config.adam),
            nodes,
            pool,
            log: MessageLog::new(config.capture_uplink),
            round: 0,
            config,
        })
    }

    pub fn config(&self) -> &FederationConfig {
        &self.config
    }

    pub fn variant(&self) -> Variant {
        self.config.model.variant
    }

    pub fn nodes(&self) -> &[TaskNode] {
        &self.nodes
    }

    pub fn nodes_mut(&mut self) -> &mut [TaskNode] {
        &mut self.nodes
    }

    pub fn coordinator(&self) -> &Coordinator {
        &self.coordinator
    }

    pub fn coordinator_mut(&mut self) -> &mut Coordinator {
        &mut self.coordinator
    }

    pub fn log(&self) -> &MessageLog {
        &self.log
    }

    pub fn rounds(&self) -> u64 {
        self.round
    }

    pub fn task_params(&self) -> Vec<ParamStore> {
        self.nodes.iter().map(|n| n.model().params.clone()).collect()
    }

    pub fn shared_params(&self) -> ParamStore {
        self.coordinator.model().params.clone()
    }

    /// Replaces every parameter value; shapes must match this federation.
    pub fn load_params(&mut self, tasks: &[ParamStore], shared: &ParamStore) -> Result<()> {
        if tasks.len() != self.nodes.len() {
            return Err(Error::CheckpointMismatch {
                name: "task count".into(),
                expected: vec![self.nodes.len()],
                found: vec![tasks.len()],
            });
        }
        for (node, p) in self.nodes.iter_mut().zip(tasks) {
            node.model_mut().params.load_from(p)?;
        }
        self.coordinator.model_mut().params.load_from(shared)
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.config.adam.learning_rate = lr;
        self.coordinator.set_learning_rate(lr);
        for n in &mut self.nodes {
            n.set_learning_rate(lr);
        }
    }

    fn deliver(&mut self, msgs: &[RoundMessage]) {
        for m in msgs {
            self.log.record(m);
        }
    }

    fn abort(&mut self) {
        self.coordinator.abort();
        for n in &mut self.nodes {
            n.abort();
        }
    }

    fn run_round(&mut self, split: Split, positions: &[usize], phase: Phase) -> Result<RoundGradients> {
        let round = self.round;
        self.round += 1;
        let out = self.run_round_inner(round, split, positions, phase);
        if out.is_err() {
            self.abort();
        }
        out
    }

    fn run_round_inner(&mut self, round: u64, split: Split, positions: &[usize], phase: Phase) -> Result<RoundGradients> {
        for node in &mut self.nodes {
            node.begin(round, split, positions, phase)?;
        }
        let k = self.nodes.len();
        let scale = 1.0 / k as f64;
        let train = phase == Phase::Train;
        match self.variant().topology() {
            Topology::Local => {
                let outs = par_each(&self.pool, &mut self.nodes, |n| n.local_step(scale))?;
                let (results, grads): (Vec<_>, Vec<_>) = outs.into_iter().unzip();
                Ok(RoundGradients {
                    results,
                    nodes: grads.into_iter().flatten().collect(),
                    shared: Vec::new(),
                })
            }
            Topology::CentralAttention => {
                let hidden = par_each(&self.pool, &mut self.nodes, TaskNode::encode)?;
                self.deliver(&hidden);
                let attention = self.coordinator.attend(round, hidden, train)?;
                self.deliver(&attention);
                let outs = par_with(&self.pool, &mut self.nodes, attention, |n, m| n.decode(m, scale))?;
                let (results, uploads): (Vec<_>, Vec<_>) = outs.into_iter().unzip();
                if !train {
                    return Ok(RoundGradients {
                        results,
                        nodes: Vec::new(),
                        shared: Vec::new(),
                    });
                }
                let uploads: Vec<RoundMessage> = uploads.into_iter().flatten().collect();
                self.deliver(&uploads);
                let (downloads, shared) = self.coordinator.backprop(uploads)?;
                self.deliver(&downloads);
                let nodes = par_with(&self.pool, &mut self.nodes, downloads, |n, m| n.finish(m))?;
                Ok(RoundGradients { results, nodes, shared })
            }
            Topology::SharedTrunk => {
                let params = self.coordinator.broadcast(round, train);
                self.deliver(&params);
                let outs = par_with(&self.pool, &mut self.nodes, params, |n, m| n.trunk_step(m, scale))?;
                let mut results = Vec::with_capacity(k);
                let mut nodes = Vec::with_capacity(k);
                let mut uploads = Vec::with_capacity(k);
                for (r, g) in outs {
                    results.push(r);
                    if let Some((local, up)) = g {
                        nodes.push(local);
                        uploads.push(up);
                    }
                }
                if !train {
                    return Ok(RoundGradients {
                        results,
                        nodes,
                        shared: Vec::new(),
                    });
                }
                self.deliver(&uploads);
                let shared = self.coordinator.collect_trunk(uploads)?;
                Ok(RoundGradients { results, nodes, shared })
            }
        }
    }

    /// Runs the forward and backward passes of one training round on the
    /// training windows at schedule `positions` without changing parameters.
    pub fn round_gradients(&mut self, positions: &[usize]) -> Result<RoundGradients> {
        self.run_round(Split::Train, positions, Phase::Train)
    }

    /// One synchronous training round; returns each task's loss.
    pub fn train_round(&mut self, positions: &[usize]) -> Result<Vec<f64>> {
        let grads = self.round_gradients(positions)?;
        self.apply(&grads)?;
        Ok(grads.results.iter().map(|r| r.loss).collect())
    }

    /// Applies one optimizer step everywhere. Every gradient is checked
    /// before any parameter changes.
    pub fn apply(&mut self, grads: &RoundGradients) -> Result<()> {
        let finite = grads.nodes.iter().flatten().chain(&grads.shared).all(Tensor::is_finite);
        if !finite {
            return Err(Error::Numeric(format!(
                "non-finite gradient in round {}; step aborted",
                self.round.saturating_sub(1)
            )));
        }
        if !grads.shared.is_empty() {
            self.coordinator.apply(&grads.shared)?;
        }
        for (node, g) in self.nodes.iter_mut().zip(&grads.nodes) {
            node.apply(g)?;
        }
        Ok(())
    }

    fn max_len(&self, split: Split) -> usize {
        self.nodes.iter().map(|n| n.split(split).len()).max().unwrap_or(0)
    }

    /// Schedule of one training epoch: a shuffled order of positions shared
    /// by all nodes, cut into batches.
    pub fn epoch_schedule(&self, epoch: usize) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.max_len(Split::Train)).collect();
        let mut rng = seed::rng(self.config.seed, Stream::Schedule, epoch as u64);
        order.shuffle(&mut rng);
        order.chunks(self.config.batch_size).map(<[usize]>::to_vec).collect()
    }

    /// One pass over the training split; returns the mean of the per-round
    /// task-averaged losses.
    pub fn train_epoch(&mut self, epoch: usize) -> Result<f64> {
        let schedule = self.epoch_schedule(epoch);
        let mut total = 0.0;
        for positions in &schedule {
            let losses = self.train_round(positions)?;
            total += losses.iter().sum::<f64>() / losses.len() as f64;
        }
        Ok(total / schedule.len().max(1) as f64)
    }

    /// Predictions for every window of `split`, in order.
    pub fn evaluate(&mut self, split: Split) -> Result<Vec<TaskEval>> {
        let n_max = self.max_len(split);
        let positions: Vec<usize> = (0..n_max).collect();
        let mut evals: Vec<TaskEval> = self
            .nodes
            .iter()
            .map(|n| {
                let d = n.split(split);
                TaskEval {
                    task_id: n.task_id().to_string(),
                    kind: d.kind,
                    labels: d.labels(),
                    windows: d.len(),
                    loss: 0.0,
                    predictions: Vec::new(),
                    targets: Vec::new(),
                    sensor_attention: None,
                    time_attention: None,
                }
            })
            .collect();
        for batch in positions.chunks(self.config.batch_size) {
            let out = self.run_round(split, batch, Phase::Eval)?;
            for (ev, r) in evals.iter_mut().zip(out.results) {
                let keep = batch.iter().take_while(|&&p| p < ev.windows).count();
                let take = |t: &Tensor, out: &mut Vec<f64>| {
                    let row = t.len() / batch.len();
                    out.extend_from_slice(&t.data()[..keep * row]);
                };
                take(&r.predictions, &mut ev.predictions);
                take(&r.targets, &mut ev.targets);
                if let Some(a) = &r.sensor_attention {
                    take(a, ev.sensor_attention.get_or_insert_with(Vec::new));
                }
                if let Some(a) = &r.time_attention {
                    take(a, ev.time_attention.get_or_insert_with(Vec::new));
                }
            }
        }
        for ev in &mut evals {
            ev.loss = split_loss(ev)?;
        }
        Ok(evals)
    }

    /// Task-averaged loss on `split`.
    pub fn average_loss(&mut self, split: Split) -> Result<f64> {
        let evals = self.evaluate(split)?;
        Ok(evals.iter().map(|e| e.loss).sum::<f64>() / evals.len() as f64)
    }

    /// Per-task and macro test metrics.
    pub fn test_metrics(&mut self, threshold: f64) -> Result<(Vec<TaskMetrics>, MacroMetrics)> {
        let evals = self.evaluate(Split::Test)?;
        let tasks = evals
            .iter()
            .map(|e| TaskMetrics::compute(&e.task_id, e.kind, e.loss, &e.predictions, &e.targets, e.labels, threshold))
            .collect::<Result<Vec<_>>>()?;
        let macro_metrics = MacroMetrics::from_tasks(&tasks);
        Ok((tasks, macro_metrics))
    }

    /// Trains with early stopping on the task-averaged validation loss,
    /// restores the best epoch's parameters and scores the test split.
    pub fn fit(&mut self, options: &FitOptions) -> Result<TrainingReport> {
        for node in &self.nodes {
            for split in [Split::Train, Split::Val, Split::Test] {
                if node.split(split).is_empty() {
                    return Err(Error::config(
                        "split",
                        format!("task {} has no {split:?} windows", node.task_id()),
                    ));
                }
            }
        }
        if options.max_epochs == 0 {
            return Err(Error::config("max_epochs", "must be positive"));
        }
        let mut best = (self.task_params(), self.shared_params());
        let mut best_val = f64::INFINITY;
        let mut best_epoch = 0;
        let mut wait = 0;
        let mut history = Vec::new();
        let mut stopped_early = false;
        for epoch in 0..options.max_epochs {
            let train_loss = self.train_epoch(epoch)?;
            let val_loss = self.average_loss(Split::Val)?;
            log::info!("epoch {epoch}: train loss {train_loss:.6}, val loss {val_loss:.6}");
            history.push(EpochRecord {
                epoch,
                train_loss,
                val_loss,
            });
            if val_loss < best_val {
                best_val = val_loss;
                best_epoch = epoch;
                best = (self.task_params(), self.shared_params());
                wait = 0;
            } else {
                wait += 1;
                if wait >= options.patience.max(1) {
                    stopped_early = true;
                    break;
                }
            }
        }
        self.load_params(&best.0, &best.1)?;
        let (tasks, macro_metrics) = self.test_metrics(options.threshold)?;
        Ok(TrainingReport {
            variant: self.variant(),
            epochs_run: history.len(),
            best_epoch,
            best_val_loss: best_val,
            stopped_early,
            rounds: self.round,
            history,
            tasks,
            macro_metrics,
        })
    }
}

fn split_loss(ev: &TaskEval) -> Result<f64> {
    let mut g = Graph::new();
    let p = g.constant(Tensor::new(vec![ev.windows, ev.labels], ev.predictions.clone())?);
    let y = g.constant(Tensor::new(vec![ev.windows, ev.labels], ev.targets.clone())?);
    let loss = task_loss(&mut g, ev.kind, p, y)?;
    Ok(g.value(loss).item())
}
