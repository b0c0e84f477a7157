use serde::{Deserialize, Serialize};

use super::attention::{apply_time_attention, sensor_attention, time_attention};
use super::{Topology, Variant};
use crate::error::{Error, Result};
use crate::nn::{Activation, Bound, Dense, Initializer, Lstm, Mode, ParamStore};
use crate::seed::{self, Stream};
use crate::tensor::{Graph, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// Multi-label classification with sigmoid outputs.
    Classification,
    /// Multi-output regression with linear outputs.
    Regression,
}

/// Input and output sizes of one task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub features: usize,
    pub labels: usize,
    pub kind: TaskKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Time steps per window (T).
    pub window: usize,
    /// Units of every LSTM layer (H).
    pub hidden: usize,
    /// Units of the first fully connected head layer.
    pub head_hidden: usize,
    pub dropout: f64,
    pub recurrent_dropout: f64,
    /// L2 coefficient on LSTM gate weights.
    pub l2: f64,
    /// Width of each shared layer of the MLP baseline.
    pub mlp_width: usize,
}

impl ModelConfig {
    pub fn new(variant: Variant, window: usize, hidden: usize) -> Self {
        ModelConfig {
            variant,
            window,
            hidden,
            head_hidden: hidden,
            dropout: 0.25,
            recurrent_dropout: 0.25,
            l2: 1e-4,
            mlp_width: 16,
        }
    }

    /// Same architecture with both dropout rates at zero.
    pub fn without_dropout(mut self) -> Self {
        self.dropout = 0.0;
        self.recurrent_dropout = 0.0;
        self
    }
}

/// Outputs of one task's forward pass.
#[derive(Clone, Copy, Debug)]
pub struct TaskOutput {
    /// `[batch, M]` predictions.
    pub prediction: Var,
    /// `[batch, T, D]` feature attention, when the variant has it.
    pub sensor_attention: Option<Var>,
    /// `[batch, T]` time attention, when the variant has it.
    pub time_attention: Option<Var>,
}

/// First-pass result of an attention variant on one node.
#[derive(Clone, Copy, Debug)]
pub struct Encoded {
    /// `[batch, T, H]` first-LSTM hidden sequence.
    pub hidden: Var,
    pub sensor_attention: Option<Var>,
}

/// Parameters private to one task node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskModel {
    pub variant: Variant,
    pub spec: TaskSpec,
    pub window: usize,
    pub params: ParamStore,
    sensor: Option<Dense>,
    lstm1: Option<Lstm>,
    lstm2: Option<Lstm>,
    fc1: Option<Dense>,
    fc2: Dense,
}

/// Parameters owned by the coordinator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharedModel {
    pub variant: Variant,
    pub params: ParamStore,
    part: SharedPart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum SharedPart {
    None,
    /// Scorer mapping the flattened `T·K·H` hidden states to `T` units.
    TimeAttention(Dense),
    LstmTrunk(Lstm),
    MlpTrunk(Dense, Dense),
}

fn output_activation(kind: TaskKind) -> Activation {
    match kind {
        TaskKind::Classification => Activation::Sigmoid,
        TaskKind::Regression => Activation::None,
    }
}

impl TaskModel {
    /// Initializes task `index`'s parameters from its own seed stream.
    pub fn new(config: &ModelConfig, spec: TaskSpec, master_seed: u64, index: usize) -> Self {
        let mut init = Initializer::new(seed::derive(master_seed, Stream::TaskInit, index as u64));
        let mut params = ParamStore::new();
        let (d, h, t) = (spec.features, config.hidden, config.window);
        let lstm = |params: &mut ParamStore, name: &str, input: usize, init: &mut Initializer| {
            Lstm::new(
                params,
                name,
                input,
                h,
                config.dropout,
                config.recurrent_dropout,
                config.l2,
                init,
            )
        };
        let variant = config.variant;
        let sensor = variant
            .has_sensor_attention()
            .then(|| Dense::new(&mut params, "sensor", d, d, Activation::None, &mut init));
        let lstm1 = matches!(
            variant,
            Variant::Fathom | Variant::FathomSa | Variant::FathomCa | Variant::SLstm
        )
        .then(|| lstm(&mut params, "lstm1", d, &mut init));
        let lstm2 = match variant {
            Variant::Fathom | Variant::FathomSa => Some(lstm(&mut params, "lstm2", d, &mut init)),
            Variant::FathomCa => Some(lstm(&mut params, "lstm2", h, &mut init)),
            _ => None,
        };
        let (fc1, fc2) = match variant {
            Variant::Lr => (
                None,
                Dense::new(&mut params, "fc2", t * d, spec.labels, output_activation(spec.kind), &mut init),
            ),
            Variant::Mlp1616 => (
                None,
                Dense::new(
                    &mut params,
                    "fc2",
                    config.mlp_width,
                    spec.labels,
                    output_activation(spec.kind),
                    &mut init,
                ),
            ),
            _ => {
                let fc1 = Dense::new(&mut params, "fc1", h, config.head_hidden, Activation::Tanh, &mut init);
                let fc2 = Dense::new(
                    &mut params,
                    "fc2",
                    config.head_hidden,
                    spec.labels,
                    output_activation(spec.kind),
                    &mut init,
                );
                (Some(fc1), fc2)
            }
        };
        TaskModel {
            variant,
            spec,
            window: t,
            params,
            sensor,
            lstm1,
            lstm2,
            fc1,
            fc2,
        }
    }

    fn check_input(&self, g: &Graph, x: Var) -> Result<()> {
        let d = g.dims(x);
        if d.len() != 3 || d[1] != self.window || d[2] != self.spec.features {
            return Err(Error::dim("task input", d, &[0, self.window, self.spec.features]));
        }
        Ok(())
    }

    fn heads(&self, g: &mut Graph, p: &Bound, z: Var) -> Result<Var> {
        let z = match &self.fc1 {
            Some(fc1) => fc1.forward(g, p, z)?,
            None => z,
        };
        self.fc2.forward(g, p, z)
    }

    fn last_step(g: &mut Graph, seq: Var) -> Result<Var> {
        let steps = g.dims(seq)[1];
        g.select(seq, 1, steps - 1)
    }

    fn sensor_stage(&self, g: &mut Graph, p: &Bound, x: Var) -> Result<(Var, Option<Var>)> {
        match &self.sensor {
            Some(score) => {
                let (context, attention) = sensor_attention(g, score, p, x)?;
                Ok((context, Some(attention)))
            }
            None => Ok((x, None)),
        }
    }

    /// First local pass: optional feature attention, then the first LSTM.
    pub fn encode(&self, g: &mut Graph, p: &Bound, x: Var, mode: Mode) -> Result<Encoded> {
        self.check_input(g, x)?;
        let lstm1 = self.lstm1.as_ref().ok_or_else(|| {
            Error::Contract(format!("variant {} has no first-pass encoder", self.variant))
        })?;
        let (context, sensor_attention) = self.sensor_stage(g, p, x)?;
        let hidden = lstm1.forward(g, p, context, mode)?;
        Ok(Encoded {
            hidden,
            sensor_attention,
        })
    }

    /// Second local pass: scale raw inputs by the time attention, run the
    /// second LSTM and the prediction heads.
    pub fn decode(&self, g: &mut Graph, p: &Bound, x: Var, attention: Var, mode: Mode) -> Result<Var> {
        self.check_input(g, x)?;
        if self.variant.topology() != Topology::CentralAttention {
            return Err(Error::Contract(format!("variant {} has no time attention", self.variant)));
        }
        let lstm2 = self.lstm2.as_ref().expect("attention variants own lstm2");
        let attended = apply_time_attention(g, x, attention)?;
        let seq = lstm2.forward(g, p, attended, mode)?;
        let last = Self::last_step(g, seq)?;
        self.heads(g, p, last)
    }

    /// Full forward pass of a variant that shares nothing.
    pub fn forward_local(&self, g: &mut Graph, p: &Bound, x: Var, mut mode: Mode) -> Result<TaskOutput> {
        self.check_input(g, x)?;
        match self.variant {
            Variant::FathomCa => {
                let enc = self.encode(g, p, x, mode.reborrow())?;
                let lstm2 = self.lstm2.as_ref().expect("fathom_ca owns lstm2");
                let seq = lstm2.forward(g, p, enc.hidden, mode)?;
                let last = Self::last_step(g, seq)?;
                Ok(TaskOutput {
                    prediction: self.heads(g, p, last)?,
                    sensor_attention: enc.sensor_attention,
                    time_attention: None,
                })
            }
            Variant::SLstm => {
                let lstm1 = self.lstm1.as_ref().expect("s_lstm owns lstm1");
                let seq = lstm1.forward(g, p, x, mode)?;
                let last = Self::last_step(g, seq)?;
                Ok(TaskOutput {
                    prediction: self.heads(g, p, last)?,
                    sensor_attention: None,
                    time_attention: None,
                })
            }
            Variant::Lr => {
                let batch = g.dims(x)[0];
                let flat = g.reshape(x, vec![batch, self.window * self.spec.features])?;
                Ok(TaskOutput {
                    prediction: self.heads(g, p, flat)?,
                    sensor_attention: None,
                    time_attention: None,
                })
            }
            other => Err(Error::Contract(format!("variant {other} is not local"))),
        }
    }

    /// Task heads on top of shared-trunk features `[batch, width]`.
    pub fn forward_trunk(&self, g: &mut Graph, p: &Bound, features: Var) -> Result<Var> {
        self.heads(g, p, features)
    }
}

impl SharedModel {
    /// Initializes the coordinator-side parameters for `tasks`.
    pub fn new(config: &ModelConfig, tasks: &[TaskSpec], master_seed: u64) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::Contract("model needs at least one task".into()));
        }
        let mut init = Initializer::new(seed::derive(master_seed, Stream::SharedInit, 0));
        let mut params = ParamStore::new();
        let (t, h) = (config.window, config.hidden);
        let same_features = || -> Result<usize> {
            let d = tasks[0].features;
            if tasks.iter().any(|s| s.features != d) {
                return Err(Error::Contract(format!(
                    "variant {} shares a trunk and needs equal feature counts",
                    config.variant
                )));
            }
            Ok(d)
        };
        let part = match config.variant {
            Variant::Fathom | Variant::FathomSa => SharedPart::TimeAttention(Dense::new(
                &mut params,
                "time_score",
                t * tasks.len() * h,
                t,
                Activation::Tanh,
                &mut init,
            )),
            Variant::MLstm => SharedPart::LstmTrunk(Lstm::new(
                &mut params,
                "trunk_lstm",
                same_features()?,
                h,
                config.dropout,
                config.recurrent_dropout,
                config.l2,
                &mut init,
            )),
            Variant::Mlp1616 => {
                let d = same_features()?;
                let w = config.mlp_width;
                let l1 = Dense::new(&mut params, "trunk1", t * d, w, Activation::Tanh, &mut init);
                let l2 = Dense::new(&mut params, "trunk2", w, w, Activation::Tanh, &mut init);
                SharedPart::MlpTrunk(l1, l2)
            }
            Variant::FathomCa | Variant::SLstm | Variant::Lr => SharedPart::None,
        };
        Ok(SharedModel {
            variant: config.variant,
            params,
            part,
        })
    }

    /// Time-attention weights `[batch, T]` from all tasks' hidden sequences.
    pub fn attention(&self, g: &mut Graph, p: &Bound, hiddens: &[Var]) -> Result<Var> {
        match &self.part {
            SharedPart::TimeAttention(score) => time_attention(g, score, p, hiddens),
            _ => Err(Error::Contract(format!("variant {} has no time attention", self.variant))),
        }
    }

    /// Shared trunk features `[batch, width]` for one task's inputs.
    pub fn trunk(&self, g: &mut Graph, p: &Bound, x: Var, mode: Mode) -> Result<Var> {
        match &self.part {
            SharedPart::LstmTrunk(lstm) => {
                let seq = lstm.forward(g, p, x, mode)?;
                TaskModel::last_step(g, seq)
            }
            SharedPart::MlpTrunk(l1, l2) => {
                let d = g.dims(x).to_vec();
                if d.len() != 3 || d[1] * d[2] != l1.input_size {
                    return Err(Error::dim("mlp trunk", &d, &[l1.input_size]));
                }
                let flat = g.reshape(x, vec![d[0], d[1] * d[2]])?;
                let z = l1.forward(g, p, flat)?;
                l2.forward(g, p, z)
            }
            _ => Err(Error::Contract(format!("variant {} has no shared trunk", self.variant))),
        }
    }
}

/// Builds every task model and the shared model for one run.
pub fn build(config: &ModelConfig, tasks: &[TaskSpec], master_seed: u64) -> Result<(Vec<TaskModel>, SharedModel)> {
    let shared = SharedModel::new(config, tasks, master_seed)?;
    let models = tasks
        .iter()
        .enumerate()
        .map(|(k, &spec)| TaskModel::new(config, spec, master_seed, k))
        .collect();
    Ok((models, shared))
}

/// Whole-model forward pass on a single graph.
///
/// `modes[k]` drives task `k`'s dropout and is consumed in the same order as
/// on a federated node: first pass, then second pass.
pub fn forward_all(
    g: &mut Graph,
    tasks: &[TaskModel],
    task_params: &[Bound],
    shared: &SharedModel,
    shared_params: &Bound,
    inputs: &[Var],
    modes: &mut [Mode],
) -> Result<Vec<TaskOutput>> {
    let k = tasks.len();
    if k == 0 || task_params.len() != k || inputs.len() != k || modes.len() != k {
        return Err(Error::Contract(format!(
            "forward over {k} tasks got {} parameter sets, {} inputs, {} modes",
            task_params.len(),
            inputs.len(),
            modes.len()
        )));
    }
    match shared.variant.topology() {
        Topology::Local => (0..k)
            .map(|i| tasks[i].forward_local(g, &task_params[i], inputs[i], modes[i].reborrow()))
            .collect(),
        Topology::CentralAttention => {
            let encoded = (0..k)
                .map(|i| tasks[i].encode(g, &task_params[i], inputs[i], modes[i].reborrow()))
                .collect::<Result<Vec<_>>>()?;
            let hiddens: Vec<Var> = encoded.iter().map(|e| e.hidden).collect();
            let a = shared.attention(g, shared_params, &hiddens)?;
            (0..k)
                .map(|i| {
                    let prediction =
                        tasks[i].decode(g, &task_params[i], inputs[i], a, modes[i].reborrow())?;
                    Ok(TaskOutput {
                        prediction,
                        sensor_attention: encoded[i].sensor_attention,
                        time_attention: Some(a),
                    })
                })
                .collect()
        }
        Topology::SharedTrunk => (0..k)
            .map(|i| {
                let features = shared.trunk(g, shared_params, inputs[i], modes[i].reborrow())?;
                Ok(TaskOutput {
                    prediction: tasks[i].forward_trunk(g, &task_params[i], features)?,
                    sensor_attention: None,
                    time_attention: None,
                })
            })
            .collect(),
    }
}
