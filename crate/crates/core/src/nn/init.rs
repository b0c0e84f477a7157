use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::tensor::Tensor;

/// Seeded parameter initializer.
///
/// Input weights use Glorot-uniform, recurrent weights are orthogonal, and
/// biases start at zero except the LSTM forget gate, which starts at one.
#[derive(Clone, Debug)]
pub struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Initializer {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform on `±sqrt(6 / (fan_in + fan_out))`, shape `[fan_in, fan_out]`.
    pub fn glorot_uniform(&mut self, fan_in: usize, fan_out: usize) -> Tensor {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| self.rng.gen_range(-limit..limit))
            .collect();
        Tensor::new(vec![fan_in, fan_out], data).expect("positive fan sizes")
    }

    /// Square orthogonal matrix from Gram-Schmidt on a Gaussian draw.
    pub fn orthogonal(&mut self, n: usize) -> Tensor {
        loop {
            let mut cols: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| self.rng.sample(StandardNormal)).collect())
                .collect();
            let mut degenerate = false;
            for j in 0..n {
                for k in 0..j {
                    let dot: f64 = cols[j].iter().zip(&cols[k]).map(|(a, b)| a * b).sum();
                    let basis = cols[k].clone();
                    cols[j].iter_mut().zip(&basis).for_each(|(a, b)| *a -= dot * b);
                }
                let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm < 1e-10 {
                    degenerate = true;
                    break;
                }
                cols[j].iter_mut().for_each(|v| *v /= norm);
            }
            if degenerate {
                continue;
            }
            let mut data = vec![0.0; n * n];
            for (j, col) in cols.iter().enumerate() {
                for (i, v) in col.iter().enumerate() {
                    data[i * n + j] = *v;
                }
            }
            return Tensor::new(vec![n, n], data).expect("n >= 1");
        }
    }
}
