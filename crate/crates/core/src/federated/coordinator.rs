use super::message::{Payload, RoundMessage};
use super::node::add_grads;
use crate::error::{Error, Result};
use crate::model::SharedModel;
use crate::nn::{Adam, AdamConfig, Bound};
use crate::tensor::{Graph, Tensor, Var};

struct AttentionRound {
    round: u64,
    train: bool,
    graph: Graph,
    bound: Bound,
    hiddens: Vec<Var>,
    attention: Var,
}

/// Holds the shared parameters and runs the cross-task computation. It only
/// ever sees hidden states and gradients.
pub struct Coordinator {
    model: SharedModel,
    adam: Adam,
    nodes: usize,
    in_flight: Option<AttentionRound>,
    trunk_round: Option<u64>,
}

impl Coordinator {
    pub fn new(model: SharedModel, nodes: usize, adam: AdamConfig) -> Self {
        Coordinator {
            adam: Adam::new(adam, &model.params),
            model,
            nodes,
            in_flight: None,
            trunk_round: None,
        }
    }

    pub fn model(&self) -> &SharedModel {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut SharedModel {
        &mut self.model
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.adam.config.learning_rate = lr;
    }

    pub fn abort(&mut self) {
        self.in_flight = None;
        self.trunk_round = None;
    }

    /// Computes the round's time attention from exactly one hidden-state
    /// message per node, all tagged with `round`, and returns one attention
    /// message per node.
    pub fn attend(&mut self, round: u64, messages: Vec<RoundMessage>, train: bool) -> Result<Vec<RoundMessage>> {
        let mut slots: Vec<Option<Tensor>> = vec![None; self.nodes];
        for msg in messages {
            if msg.round != round {
                return Err(Error::Contract(format!(
                    "round {round}: node {} sent a message for round {}",
                    msg.node, msg.round
                )));
            }
            let Payload::Hidden(h) = msg.payload else {
                return Err(Error::Contract(format!("round {round}: expected hidden states from node {}", msg.node)));
            };
            let slot = slots
                .get_mut(msg.node)
                .ok_or_else(|| Error::Contract(format!("round {round}: unknown node {}", msg.node)))?;
            if slot.replace(h).is_some() {
                return Err(Error::Contract(format!("round {round}: node {} sent twice", msg.node)));
            }
        }
        if let Some(missing) = slots.iter().position(Option::is_none) {
            return Err(Error::Straggler {
                round,
                node: missing,
                reason: "no hidden states received".into(),
            });
        }
        let mut g = Graph::new();
        let bound = if train {
            self.model.params.bind(&mut g)
        } else {
            self.model.params.bind_frozen(&mut g)
        };
        let hiddens: Vec<Var> = slots
            .into_iter()
            .map(|h| {
                let h = h.expect("checked above");
                if train {
                    g.param(h)
                } else {
                    g.constant(h)
                }
            })
            .collect();
        let attention = self.model.attention(&mut g, &bound, &hiddens)?;
        let a = g.value(attention).clone();
        let out = (0..self.nodes)
            .map(|k| RoundMessage::new(round, k, Payload::Attention(a.clone())))
            .collect();
        self.in_flight = train.then_some(AttentionRound {
            round,
            train,
            graph: g,
            bound,
            hiddens,
            attention,
        });
        Ok(out)
    }

    /// Sums the nodes' attention gradients in node order, backpropagates them
    /// through the scorer and returns each node's hidden-state gradient with
    /// the scorer's own gradient. Parameters are not changed.
    pub fn backprop(&mut self, messages: Vec<RoundMessage>) -> Result<(Vec<RoundMessage>, Vec<Tensor>)> {
        let mut state = self
            .in_flight
            .take()
            .ok_or_else(|| Error::Contract("no attention round in flight".into()))?;
        debug_assert!(state.train);
        let round = state.round;
        let mut slots: Vec<Option<Tensor>> = vec![None; self.nodes];
        for msg in messages {
            if msg.round != round {
                return Err(Error::Contract(format!(
                    "round {round}: node {} sent a gradient for round {}",
                    msg.node, msg.round
                )));
            }
            let Payload::AttentionGrad(t) = msg.payload else {
                return Err(Error::Contract(format!("round {round}: expected attention gradient from node {}", msg.node)));
            };
            let slot = slots
                .get_mut(msg.node)
                .ok_or_else(|| Error::Contract(format!("round {round}: unknown node {}", msg.node)))?;
            *slot = Some(t);
        }
        let mut total: Option<Tensor> = None;
        for (k, slot) in slots.into_iter().enumerate() {
            let t = slot.ok_or_else(|| Error::Straggler {
                round,
                node: k,
                reason: "no attention gradient received".into(),
            })?;
            total = Some(match total {
                None => t,
                Some(acc) => add_grads(vec![acc], &[t]).pop().expect("one tensor"),
            });
        }
        let total = total.ok_or_else(|| Error::Contract("no nodes".into()))?;
        state.graph.backward_seeded(&[(state.attention, total)])?;
        let grads = self.model.params.grads(&state.graph, &state.bound);
        let out = state
            .hiddens
            .iter()
            .enumerate()
            .map(|(k, &h)| RoundMessage::new(round, k, Payload::HiddenGrad(state.graph.grad_or_zeros(h))))
            .collect();
        Ok((out, grads))
    }

    /// Current shared-trunk parameters for every node.
    pub fn broadcast(&mut self, round: u64, train: bool) -> Vec<RoundMessage> {
        let values: Vec<Tensor> = self.model.params.tensors().cloned().collect();
        if train {
            self.trunk_round = Some(round);
        }
        (0..self.nodes)
            .map(|k| RoundMessage::new(round, k, Payload::SharedParams(values.clone())))
            .collect()
    }

    /// Sums shared-trunk gradients in node order.
    pub fn collect_trunk(&mut self, messages: Vec<RoundMessage>) -> Result<Vec<Tensor>> {
        let round = self
            .trunk_round
            .take()
            .ok_or_else(|| Error::Contract("no trunk round in flight".into()))?;
        let mut slots: Vec<Option<Vec<Tensor>>> = vec![None; self.nodes];
        for msg in messages {
            if msg.round != round {
                return Err(Error::Contract(format!(
                    "round {round}: node {} sent trunk gradients for round {}",
                    msg.node, msg.round
                )));
            }
            let Payload::SharedGrads(ts) = msg.payload else {
                return Err(Error::Contract(format!("round {round}: expected trunk gradients from node {}", msg.node)));
            };
            let slot = slots
                .get_mut(msg.node)
                .ok_or_else(|| Error::Contract(format!("round {round}: unknown node {}", msg.node)))?;
            *slot = Some(ts);
        }
        let mut total: Option<Vec<Tensor>> = None;
        for (k, slot) in slots.into_iter().enumerate() {
            let ts = slot.ok_or_else(|| Error::Straggler {
                round,
                node: k,
                reason: "no trunk gradients received".into(),
            })?;
            total = Some(match total {
                None => ts,
                Some(acc) => add_grads(acc, &ts),
            });
        }
        total.ok_or_else(|| Error::Contract("no nodes".into()))
    }

    pub fn apply(&mut self, grads: &[Tensor]) -> Result<()> {
        self.adam.step(&mut self.model.params, grads)
    }
}
