use serde::{Deserialize, Serialize};

use super::{Bound, Initializer, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::tensor::{Graph, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    None,
    Tanh,
    Sigmoid,
    /// Softmax across the output units.
    Softmax,
}

/// Fully connected layer `act(x · W + b)` on `[batch, in]` inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input_size: usize,
    pub output_size: usize,
    pub activation: Activation,
}

impl Dense {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input_size: usize,
        output_size: usize,
        activation: Activation,
        init: &mut Initializer,
    ) -> Self {
        let weight = store.add(
            format!("{name}.weight"),
            init.glorot_uniform(input_size, output_size),
            0.0,
        );
        let bias = store.add(
            format!("{name}.bias"),
            Tensor::zeros(vec![output_size]).expect("output_size >= 1"),
            0.0,
        );
        Dense {
            weight,
            bias,
            input_size,
            output_size,
            activation,
        }
    }

    pub fn forward(&self, g: &mut Graph, params: &Bound, x: Var) -> Result<Var> {
        let dims = g.dims(x);
        if dims.len() != 2 || dims[1] != self.input_size {
            return Err(Error::dim("dense", dims, &[self.input_size, self.output_size]));
        }
        let batch = dims[0];
        let xw = g.matmul(x, params.get(self.weight))?;
        let b = g.repeat(params.get(self.bias), 0, batch)?;
        let z = g.add(xw, b)?;
        Ok(match self.activation {
            Activation::None => z,
            Activation::Tanh => g.tanh(z),
            Activation::Sigmoid => g.sigmoid(z),
            Activation::Softmax => g.softmax(z, 1)?,
        })
    }
}
