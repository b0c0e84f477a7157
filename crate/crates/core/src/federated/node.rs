use rand_chacha::ChaCha8Rng;

use super::message::{Payload, RoundMessage};
use crate::data::{TaskDataset, TaskSplits};
use crate::error::{Error, Result};
use crate::model::{task_loss, SharedModel, TaskModel, Topology};
use crate::nn::{Adam, AdamConfig, Bound, Mode};
use crate::seed::{self, Stream};
use crate::tensor::{Graph, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Train,
    Eval,
}

/// What a node learned from one batch, kept on the node.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub loss: f64,
    /// `[batch, M]`.
    pub predictions: Tensor,
    /// `[batch, M]`.
    pub targets: Tensor,
    /// `[batch, T, D]`, when the variant has feature attention.
    pub sensor_attention: Option<Tensor>,
    /// `[batch, T]`, when the variant has time attention.
    pub time_attention: Option<Tensor>,
}

struct FirstPass {
    graph: Graph,
    bound: Bound,
    hidden: Var,
    sensor_attention: Option<Var>,
}

struct Pending {
    round: u64,
    phase: Phase,
    x: Tensor,
    y: Tensor,
    first: Option<FirstPass>,
    second_grads: Option<Vec<Tensor>>,
}

/// One task's private data, parameters and optimizer.
///
/// Raw windows never leave this struct: every outgoing [`RoundMessage`] is
/// built from hidden states or gradients.
pub struct TaskNode {
    pub id: usize,
    data: TaskSplits,
    model: TaskModel,
    /// Local copy of the shared trunk architecture; its values are replaced by
    /// every broadcast before use.
    trunk: Option<SharedModel>,
    adam: Adam,
    rng: ChaCha8Rng,
    pending: Option<Pending>,
}

impl TaskNode {
    pub fn new(
        id: usize,
        data: TaskSplits,
        model: TaskModel,
        shared_template: &SharedModel,
        adam: AdamConfig,
        master_seed: u64,
    ) -> Self {
        let trunk = (model.variant.topology() == Topology::SharedTrunk).then(|| shared_template.clone());
        TaskNode {
            id,
            adam: Adam::new(adam, &model.params),
            data,
            model,
            trunk,
            rng: seed::rng(master_seed, Stream::NodeDropout, id as u64),
            pending: None,
        }
    }

    pub fn model(&self) -> &TaskModel {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut TaskModel {
        &mut self.model
    }

    pub fn task_id(&self) -> &str {
        self.data.task_id()
    }

    pub fn split(&self, split: Split) -> &TaskDataset {
        match split {
            Split::Train => &self.data.train,
            Split::Val => &self.data.val,
            Split::Test => &self.data.test,
        }
    }

    /// Mutable access for tests that plant canary values in private data.
    pub fn data_mut(&mut self) -> &mut TaskSplits {
        &mut self.data
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.adam.config.learning_rate = lr;
    }

    pub fn abort(&mut self) {
        self.pending = None;
    }

    /// Loads the batch for schedule positions `positions`; a position `i`
    /// maps to window `i mod len`, so shorter datasets cycle.
    pub fn begin(&mut self, round: u64, split: Split, positions: &[usize], phase: Phase) -> Result<()> {
        let data = self.split(split);
        if data.is_empty() || positions.is_empty() {
            self.pending = None;
            return Err(Error::Straggler {
                round,
                node: self.id,
                reason: format!("no {split:?} windows for this batch"),
            });
        }
        let n = data.len();
        let indices: Vec<usize> = positions.iter().map(|p| p % n).collect();
        let (x, y) = data.batch(&indices)?;
        self.pending = Some(Pending {
            round,
            phase,
            x,
            y,
            first: None,
            second_grads: None,
        });
        Ok(())
    }

    fn pending(&mut self) -> Result<&mut Pending> {
        let id = self.id;
        self.pending
            .as_mut()
            .ok_or_else(|| Error::Contract(format!("node {id} has no batch in flight")))
    }

    fn check_round(&self, msg: &RoundMessage) -> Result<()> {
        let pending = self.pending.as_ref().ok_or_else(|| {
            Error::Contract(format!("node {} received a message with no batch in flight", self.id))
        })?;
        if msg.round != pending.round || msg.node != self.id {
            return Err(Error::Contract(format!(
                "node {} in round {} got message for node {} round {}",
                self.id, pending.round, msg.node, msg.round
            )));
        }
        Ok(())
    }

    fn bind(&self, g: &mut Graph, phase: Phase) -> Bound {
        match phase {
            Phase::Train => self.model.params.bind(g),
            Phase::Eval => self.model.params.bind_frozen(g),
        }
    }

    /// First pass of an attention variant; returns the hidden-state upload.
    pub fn encode(&mut self) -> Result<RoundMessage> {
        let (round, phase, x) = {
            let p = self.pending()?;
            (p.round, p.phase, p.x.clone())
        };
        let mut g = Graph::new();
        let bound = self.bind(&mut g, phase);
        let xv = g.constant(x);
        let mode = match phase {
            Phase::Train => Mode::Train(&mut self.rng),
            Phase::Eval => Mode::Eval,
        };
        let enc = self.model.encode(&mut g, &bound, xv, mode)?;
        let hidden = g.value(enc.hidden).clone();
        self.pending()?.first = Some(FirstPass {
            graph: g,
            bound,
            hidden: enc.hidden,
            sensor_attention: enc.sensor_attention,
        });
        Ok(RoundMessage::new(round, self.id, Payload::Hidden(hidden)))
    }

    /// Second pass with the coordinator's time attention. In training the
    /// loss is scaled by `loss_scale` before backpropagation and the gradient
    /// w.r.t. the attention is returned for upload.
    pub fn decode(&mut self, msg: RoundMessage, loss_scale: f64) -> Result<(StepResult, Option<RoundMessage>)> {
        self.check_round(&msg)?;
        let Payload::Attention(attention) = msg.payload else {
            return Err(Error::Contract(format!("node {} expected attention weights", self.id)));
        };
        let (round, phase, x, y) = {
            let p = self.pending()?;
            (p.round, p.phase, p.x.clone(), p.y.clone())
        };
        let mut g = Graph::new();
        let bound = self.bind(&mut g, phase);
        let a = match phase {
            Phase::Train => g.param(attention.clone()),
            Phase::Eval => g.constant(attention.clone()),
        };
        let xv = g.constant(x);
        let yv = g.constant(y.clone());
        let mode = match phase {
            Phase::Train => Mode::Train(&mut self.rng),
            Phase::Eval => Mode::Eval,
        };
        let pred = self.model.decode(&mut g, &bound, xv, a, mode)?;
        let loss = task_loss(&mut g, self.model.spec.kind, pred, yv)?;
        let sensor_attention = {
            let p = self.pending()?;
            let first = p.first.as_ref().ok_or_else(|| Error::Contract("decode before encode".into()))?;
            first.sensor_attention.map(|v| first.graph.value(v).clone())
        };
        let result = StepResult {
            loss: g.value(loss).item(),
            predictions: g.value(pred).clone(),
            targets: y,
            sensor_attention,
            time_attention: Some(attention),
        };
        if phase == Phase::Eval {
            return Ok((result, None));
        }
        g.backward_seeded(&[(loss, Tensor::scalar(loss_scale))])?;
        let grad_a = g.grad_or_zeros(a);
        let grads = self.model.params.grads(&g, &bound);
        self.pending()?.second_grads = Some(grads);
        Ok((result, Some(RoundMessage::new(round, self.id, Payload::AttentionGrad(grad_a)))))
    }

    /// Completes backpropagation through the first pass and returns this
    /// node's full parameter gradient.
    pub fn finish(&mut self, msg: RoundMessage) -> Result<Vec<Tensor>> {
        self.check_round(&msg)?;
        let Payload::HiddenGrad(grad) = msg.payload else {
            return Err(Error::Contract(format!("node {} expected a hidden-state gradient", self.id)));
        };
        let pending = self.pending.take().expect("checked above");
        let mut first = pending
            .first
            .ok_or_else(|| Error::Contract("finish before encode".into()))?;
        let second = pending
            .second_grads
            .ok_or_else(|| Error::Contract("finish before decode".into()))?;
        first.graph.backward_seeded(&[(first.hidden, grad)])?;
        let grads = self.model.params.grads(&first.graph, &first.bound);
        Ok(add_grads(grads, &second))
    }

    /// Whole step of a variant that shares nothing.
    pub fn local_step(&mut self, loss_scale: f64) -> Result<(StepResult, Option<Vec<Tensor>>)> {
        let pending = self.pending.take().ok_or_else(|| Error::Contract("no batch in flight".into()))?;
        let mut g = Graph::new();
        let bound = self.bind(&mut g, pending.phase);
        let xv = g.constant(pending.x);
        let yv = g.constant(pending.y.clone());
        let mode = match pending.phase {
            Phase::Train => Mode::Train(&mut self.rng),
            Phase::Eval => Mode::Eval,
        };
        let out = self.model.forward_local(&mut g, &bound, xv, mode)?;
        let loss = task_loss(&mut g, self.model.spec.kind, out.prediction, yv)?;
        let result = StepResult {
            loss: g.value(loss).item(),
            predictions: g.value(out.prediction).clone(),
            targets: pending.y,
            sensor_attention: out.sensor_attention.map(|v| g.value(v).clone()),
            time_attention: None,
        };
        if pending.phase == Phase::Eval {
            return Ok((result, None));
        }
        g.backward_seeded(&[(loss, Tensor::scalar(loss_scale))])?;
        Ok((result, Some(self.model.params.grads(&g, &bound))))
    }

    /// Whole step of a shared-trunk variant using broadcast parameters.
    /// Returns local gradients and the shared-gradient upload in training.
    pub fn trunk_step(
        &mut self,
        msg: RoundMessage,
        loss_scale: f64,
    ) -> Result<(StepResult, Option<(Vec<Tensor>, RoundMessage)>)> {
        self.check_round(&msg)?;
        let Payload::SharedParams(values) = msg.payload else {
            return Err(Error::Contract(format!("node {} expected shared parameters", self.id)));
        };
        let pending = self.pending.take().expect("checked above");
        let trunk = self
            .trunk
            .as_mut()
            .ok_or_else(|| Error::Contract("variant has no shared trunk".into()))?;
        trunk.params.load_values(values)?;
        let mut g = Graph::new();
        let (bound, shared_bound) = match pending.phase {
            Phase::Train => (self.model.params.bind(&mut g), trunk.params.bind(&mut g)),
            Phase::Eval => (self.model.params.bind_frozen(&mut g), trunk.params.bind_frozen(&mut g)),
        };
        let xv = g.constant(pending.x);
        let yv = g.constant(pending.y.clone());
        let mode = match pending.phase {
            Phase::Train => Mode::Train(&mut self.rng),
            Phase::Eval => Mode::Eval,
        };
        let features = trunk.trunk(&mut g, &shared_bound, xv, mode)?;
        let pred = self.model.forward_trunk(&mut g, &bound, features)?;
        let loss = task_loss(&mut g, self.model.spec.kind, pred, yv)?;
        let result = StepResult {
            loss: g.value(loss).item(),
            predictions: g.value(pred).clone(),
            targets: pending.y,
            sensor_attention: None,
            time_attention: None,
        };
        if pending.phase == Phase::Eval {
            return Ok((result, None));
        }
        g.backward_seeded(&[(loss, Tensor::scalar(loss_scale))])?;
        let local = self.model.params.grads(&g, &bound);
        let shared = trunk.params.grads(&g, &shared_bound);
        let upload = RoundMessage::new(pending.round, self.id, Payload::SharedGrads(shared));
        Ok((result, Some((local, upload))))
    }

    pub fn apply(&mut self, grads: &[Tensor]) -> Result<()> {
        self.adam.step(&mut self.model.params, grads)
    }
}

pub(crate) fn add_grads(mut a: Vec<Tensor>, b: &[Tensor]) -> Vec<Tensor> {
    for (x, y) in a.iter_mut().zip(b) {
        x.data_mut().iter_mut().zip(y.data()).for_each(|(p, q)| *p += q);
    }
    a
}
