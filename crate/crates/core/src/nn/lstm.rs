use serde::{Deserialize, Serialize};

use super::{dropout_mask, Bound, Initializer, Mode, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::tensor::{Graph, Tensor, Var};

/// Gate order used for the weight arrays: input, forget, output, candidate.
pub const GATES: [&str; 4] = ["input", "forget", "output", "candidate"];

/// Single LSTM layer returning the hidden state at every time step.
///
/// Per step: `i = σ(xWᵢ + hUᵢ + bᵢ)`, `f`, `o` likewise, `g = tanh(…)`,
/// `c' = f⊙c + i⊙g`, `h' = o⊙tanh(c')`, starting from `h = c = 0`.
/// In training mode inputs and recurrent states are masked with inverted
/// dropout; both masks are drawn once per sequence and shared by all gates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub input_size: usize,
    pub hidden_size: usize,
    pub input_weights: [ParamId; 4],
    pub recurrent_weights: [ParamId; 4],
    pub biases: [ParamId; 4],
    pub dropout: f64,
    pub recurrent_dropout: f64,
}

impl Lstm {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input_size: usize,
        hidden_size: usize,
        dropout: f64,
        recurrent_dropout: f64,
        l2: f64,
        init: &mut Initializer,
    ) -> Self {
        let input_weights = GATES.map(|gate| {
            store.add(
                format!("{name}.w_{gate}"),
                init.glorot_uniform(input_size, hidden_size),
                l2,
            )
        });
        let recurrent_weights = GATES
            .map(|gate| store.add(format!("{name}.u_{gate}"), init.orthogonal(hidden_size), l2));
        let biases = GATES.map(|gate| {
            let fill = if gate == "forget" { 1.0 } else { 0.0 };
            store.add(
                format!("{name}.b_{gate}"),
                Tensor::full(vec![hidden_size], fill).expect("hidden_size >= 1"),
                0.0,
            )
        });
        Lstm {
            input_size,
            hidden_size,
            input_weights,
            recurrent_weights,
            biases,
            dropout,
            recurrent_dropout,
        }
    }

    /// Runs `x: [batch, T, input]` and returns `[batch, T, hidden]`.
    pub fn forward(&self, g: &mut Graph, params: &Bound, x: Var, mut mode: Mode) -> Result<Var> {
        let dims = g.dims(x).to_vec();
        if dims.len() != 3 || dims[2] != self.input_size {
            return Err(Error::dim("lstm", &dims, &[0, 0, self.input_size]));
        }
        let (batch, steps) = (dims[0], dims[1]);
        let hidden = self.hidden_size;

        let (input_mask, state_mask) = match &mut mode {
            Mode::Train(rng) => {
                let im = (self.dropout > 0.0)
                    .then(|| dropout_mask(&mut **rng, &[batch, self.input_size], self.dropout));
                let sm = (self.recurrent_dropout > 0.0)
                    .then(|| dropout_mask(&mut **rng, &[batch, hidden], self.recurrent_dropout));
                (im.map(|m| g.constant(m)), sm.map(|m| g.constant(m)))
            }
            Mode::Eval => (None, None),
        };

        let zeros = Tensor::zeros(vec![batch, hidden])?;
        let mut h = g.constant(zeros.clone());
        let mut c = g.constant(zeros);
        let biases: Vec<Var> = self
            .biases
            .iter()
            .map(|&b| g.repeat(params.get(b), 0, batch))
            .collect::<Result<_>>()?;
        let mut outputs = Vec::with_capacity(steps);
        for t in 0..steps {
            let mut xt = g.select(x, 1, t)?;
            if let Some(m) = input_mask {
                xt = g.mul(xt, m)?;
            }
            let hr = match state_mask {
                Some(m) => g.mul(h, m)?,
                None => h,
            };
            let mut pre = [xt; 4];
            for k in 0..4 {
                let xw = g.matmul(xt, params.get(self.input_weights[k]))?;
                let hu = g.matmul(hr, params.get(self.recurrent_weights[k]))?;
                let s = g.add(xw, hu)?;
                pre[k] = g.add(s, biases[k])?;
            }
            let i = g.sigmoid(pre[0]);
            let f = g.sigmoid(pre[1]);
            let o = g.sigmoid(pre[2]);
            let cand = g.tanh(pre[3]);
            let fc = g.mul(f, c)?;
            let ig = g.mul(i, cand)?;
            c = g.add(fc, ig)?;
            let tc = g.tanh(c);
            h = g.mul(o, tc)?;
            outputs.push(h);
        }
        g.stack(&outputs, 1)
    }
}
