use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    NodeToCoordinator,
    CoordinatorToNode,
}

/// Everything that may cross a node boundary. Raw inputs and labels have no
/// variant here.
#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    /// First-LSTM hidden sequence `[batch, T, H]`.
    Hidden(Tensor),
    /// Gradient of the node's loss share w.r.t. the time attention it used.
    AttentionGrad(Tensor),
    /// Gradient contribution for the coordinator's shared trunk.
    SharedGrads(Vec<Tensor>),
    /// Time-attention weights `[batch, T]`.
    Attention(Tensor),
    /// Gradient w.r.t. the node's hidden sequence through the time scorer.
    HiddenGrad(Tensor),
    /// Current shared-trunk parameters.
    SharedParams(Vec<Tensor>),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Hidden(_) => "hidden",
            Payload::AttentionGrad(_) => "attention_grad",
            Payload::SharedGrads(_) => "shared_grads",
            Payload::Attention(_) => "attention",
            Payload::HiddenGrad(_) => "hidden_grad",
            Payload::SharedParams(_) => "shared_params",
        }
    }

    pub fn direction(&self) -> Direction {
        match self {
            Payload::Hidden(_) | Payload::AttentionGrad(_) | Payload::SharedGrads(_) => {
                Direction::NodeToCoordinator
            }
            Payload::Attention(_) | Payload::HiddenGrad(_) | Payload::SharedParams(_) => {
                Direction::CoordinatorToNode
            }
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        match self {
            Payload::Hidden(t)
            | Payload::AttentionGrad(t)
            | Payload::Attention(t)
            | Payload::HiddenGrad(t) => vec![t],
            Payload::SharedGrads(ts) | Payload::SharedParams(ts) => ts.iter().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundMessage {
    pub round: u64,
    pub node: usize,
    pub payload: Payload,
}

impl RoundMessage {
    pub fn new(round: u64, node: usize, payload: Payload) -> Self {
        RoundMessage { round, node, payload }
    }

    /// Wire encoding: the payload tensors' values as little-endian `f64`,
    /// concatenated in order.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.payload
            .tensors()
            .iter()
            .flat_map(|t| t.data().iter().flat_map(|v| v.to_le_bytes()))
            .collect()
    }

    pub fn byte_size(&self) -> usize {
        self.payload.tensors().iter().map(|t| t.len() * 8).sum()
    }
}

/// One line of the message audit log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub round: u64,
    pub node: usize,
    pub direction: Direction,
    pub kind: String,
    pub shapes: Vec<Vec<usize>>,
    pub bytes: usize,
}

/// Log of every message the runtime delivered, optionally keeping the raw
/// bytes of coordinator-bound traffic for auditing.
#[derive(Clone, Debug, Default)]
pub struct MessageLog {
    records: Vec<MessageRecord>,
    capture_uplink: bool,
    uplink_bytes: Vec<Vec<u8>>,
}

impl MessageLog {
    pub fn new(capture_uplink: bool) -> Self {
        MessageLog {
            capture_uplink,
            ..Default::default()
        }
    }

    pub fn record(&mut self, msg: &RoundMessage) {
        let direction = msg.payload.direction();
        self.records.push(MessageRecord {
            round: msg.round,
            node: msg.node,
            direction,
            kind: msg.payload.kind().to_string(),
            shapes: msg.payload.tensors().iter().map(|t| t.dims().to_vec()).collect(),
            bytes: msg.byte_size(),
        });
        if self.capture_uplink && direction == Direction::NodeToCoordinator {
            self.uplink_bytes.push(msg.to_bytes());
        }
    }

    pub fn records(&self) -> &[MessageRecord] {
        &self.records
    }

    /// Captured coordinator-bound payloads, in delivery order.
    pub fn uplink_bytes(&self) -> &[Vec<u8>] {
        &self.uplink_bytes
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(path: &Path) -> Result<Vec<MessageRecord>> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(Error::from))
            .collect()
    }
}

/// Whether the 8-byte little-endian encoding of `value` occurs anywhere in
/// `bytes`, at any alignment.
pub fn contains_f64(bytes: &[u8], value: f64) -> bool {
    let needle = value.to_le_bytes();
    bytes.windows(8).any(|w| w == needle)
}
