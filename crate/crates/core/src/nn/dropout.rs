use rand::{Rng, RngCore};

use crate::tensor::Tensor;

/// Forward-pass mode. Training carries the random stream used for dropout
/// masks; evaluation is fully deterministic.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

impl Mode<'_> {
    pub fn reborrow(&mut self) -> Mode<'_> {
        match self {
            Mode::Eval => Mode::Eval,
            Mode::Train(rng) => Mode::Train(&mut **rng),
        }
    }

    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

/// Inverted-dropout mask: each entry is `1 / (1 - rate)` with probability
/// `1 - rate` and zero otherwise, so the masked expectation is unchanged.
pub fn dropout_mask(rng: &mut dyn RngCore, dims: &[usize], rate: f64) -> Tensor {
    let keep = 1.0 - rate;
    let n: usize = dims.iter().product();
    let data = (0..n)
        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect();
    Tensor::new(dims.to_vec(), data).expect("mask dims come from a tensor")
}
