//! Finite-difference checks shared by the gradient tests and the
//! acceptance run.

use fathom_core::model::{build, forward_all, task_loss, ModelConfig, TaskKind, TaskSpec, Variant};
use fathom_core::nn::{Activation, Bound, Dense, Initializer, Lstm, Mode, ParamStore};
use fathom_core::tensor::gradcheck::check;
use fathom_core::tensor::{Graph, Tensor, Var};
use fathom_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS: f64 = 1e-4;
pub const TOL: f64 = 1e-3;

pub fn random(rng: &mut ChaCha8Rng, dims: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = dims.iter().product();
    Tensor::new(dims.to_vec(), (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

/// Values bounded away from zero, for ops with a kink there.
fn away_from_zero(rng: &mut ChaCha8Rng, dims: &[usize]) -> Tensor {
    let n = dims.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.gen_range(0.2..1.5);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::new(dims.to_vec(), data).unwrap()
}

/// Scalar projection `Σ out ⊙ w` with fixed random weights so that every
/// output entry contributes a distinct amount.
fn project(g: &mut Graph, out: Var, seed: u64) -> Result<Var> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
    let w = random(&mut rng, g.dims(out), -1.0, 1.0);
    let w = g.constant(w);
    let p = g.mul(out, w)?;
    Ok(g.sum(p))
}

fn measure<F>(out: &mut Vec<(&'static str, f64)>, name: &'static str, inputs: &[Tensor], f: F)
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    out.push((name, check(inputs, EPS, f).unwrap().max_rel_error));
}

/// Relative FD error of every tensor op on inputs drawn from `seed`.
pub fn op_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random(&mut rng, &[3, 4], -1.0, 1.0);
        let b = random(&mut rng, &[4, 2], -1.0, 1.0);
        let c = random(&mut rng, &[3, 4], -1.0, 1.0);
        let s = random(&mut rng, &[1], -1.0, 1.0);
        let pos = random(&mut rng, &[3, 4], 0.2, 2.0);
        let kinked = away_from_zero(&mut rng, &[3, 4]);
        let cube = random(&mut rng, &[2, 3, 4], -2.0, 2.0);

        measure(&mut out, "matmul", &[a.clone(), b.clone()], |g, v| {
            let y = g.matmul(v[0], v[1])?;
            project(g, y, seed)
        });
        measure(&mut out, "add", &[a.clone(), c.clone()], |g, v| {
            let y = g.add(v[0], v[1])?;
            project(g, y, seed)
        });
        measure(&mut out, "add scalar operand", &[a.clone(), s.clone()], |g, v| {
            let y = g.add(v[0], v[1])?;
            project(g, y, seed)
        });
        measure(&mut out, "sub", &[a.clone(), c.clone()], |g, v| {
            let y = g.sub(v[0], v[1])?;
            project(g, y, seed)
        });
        measure(&mut out, "mul", &[a.clone(), c.clone()], |g, v| {
            let y = g.mul(v[0], v[1])?;
            project(g, y, seed)
        });
        measure(&mut out, "mul scalar operand", &[s.clone(), c.clone()], |g, v| {
            let y = g.mul(v[0], v[1])?;
            project(g, y, seed)
        });
        measure(&mut out, "scale", &[a.clone()], |g, v| {
            let y = g.scale(v[0], -2.5);
            project(g, y, seed)
        });
        measure(&mut out, "add_scalar", &[a.clone()], |g, v| {
            let y = g.add_scalar(v[0], 0.7);
            project(g, y, seed)
        });
        measure(&mut out, "tanh", &[cube.clone()], |g, v| {
            let y = g.tanh(v[0]);
            project(g, y, seed)
        });
        measure(&mut out, "sigmoid", &[cube.clone()], |g, v| {
            let y = g.sigmoid(v[0]);
            project(g, y, seed)
        });
        measure(&mut out, "ln", &[pos.clone()], |g, v| {
            let y = g.ln(v[0]);
            project(g, y, seed)
        });
        measure(&mut out, "abs", &[kinked.clone()], |g, v| {
            let y = g.abs(v[0]);
            project(g, y, seed)
        });
        measure(&mut out, "clamp", &[kinked.clone()], |g, v| {
            let y = g.clamp(v[0], -0.7, 0.7);
            project(g, y, seed)
        });
        for axis in 0..3 {
            measure(&mut out, "softmax", &[cube.clone()], |g, v| {
                let y = g.softmax(v[0], axis)?;
                project(g, y, seed)
            });
        }
        measure(&mut out, "sum", &[cube.clone()], |g, v| {
            let y = g.tanh(v[0]);
            Ok(g.sum(y))
        });
        measure(&mut out, "mean", &[cube.clone()], |g, v| {
            let y = g.sigmoid(v[0]);
            Ok(g.mean(y))
        });
        measure(&mut out, "concat", &[a.clone(), c.clone()], |g, v| {
            let y = g.concat(&[v[0], v[1]], 1)?;
            project(g, y, seed)
        });
        measure(&mut out, "reshape", &[cube.clone()], |g, v| {
            let y = g.reshape(v[0], vec![6, 4])?;
            project(g, y, seed)
        });
        measure(&mut out, "flatten", &[cube.clone()], |g, v| {
            let y = g.flatten(v[0]);
            project(g, y, seed)
        });
        for axis in 0..3 {
            measure(&mut out, "select", &[cube.clone()], |g, v| {
                let y = g.select(v[0], axis, 1)?;
                project(g, y, seed)
            });
        }
        measure(&mut out, "stack", &[a.clone(), c.clone()], |g, v| {
            let y = g.stack(&[v[0], v[1]], 1)?;
            project(g, y, seed)
        });
        measure(&mut out, "repeat", &[a.clone()], |g, v| {
            let y = g.repeat(v[0], 2, 3)?;
            project(g, y, seed)
        });
    }
    out
}

/// Adds small noise so that zero-initialized biases do not hide errors.
fn jitter(rng: &mut ChaCha8Rng, tensors: Vec<Tensor>) -> Vec<Tensor> {
    tensors
        .into_iter()
        .map(|t| {
            let dims = t.dims().to_vec();
            let noise = random(rng, &dims, -0.2, 0.2);
            let data = t.data().iter().zip(noise.data()).map(|(a, b)| a + b).collect();
            Tensor::new(dims, data).unwrap()
        })
        .collect()
}

fn layer_inputs(x: Tensor, store: &ParamStore) -> Vec<Tensor> {
    std::iter::once(x).chain(store.tensors().cloned()).collect()
}

/// Relative FD error of a dense layer for every activation.
pub fn dense_errors() -> Vec<(Activation, f64)> {
    [Activation::None, Activation::Tanh, Activation::Sigmoid, Activation::Softmax]
        .into_iter()
        .enumerate()
        .map(|(seed, act)| {
            let mut store = ParamStore::new();
            let mut init = Initializer::new(seed as u64);
            let dense = Dense::new(&mut store, "d", 4, 3, act, &mut init);
            let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
            let x = random(&mut rng, &[5, 4], -1.0, 1.0);
            let inputs = jitter(&mut rng, layer_inputs(x, &store));
            let r = check(&inputs, EPS, |g, v| {
                let bound = Bound::from_vars(v[1..].to_vec());
                let y = dense.forward(g, &bound, v[0])?;
                project(g, y, seed as u64)
            })
            .unwrap();
            (act, r.max_rel_error)
        })
        .collect()
}

/// Relative FD error of an LSTM layer, input and all gate weights.
pub fn lstm_error(seed: u64) -> f64 {
    let mut store = ParamStore::new();
    let mut init = Initializer::new(seed);
    let lstm = Lstm::new(&mut store, "l", 3, 4, 0.0, 0.0, 0.0, &mut init);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random(&mut rng, &[2, 5, 3], -1.0, 1.0);
    let inputs = jitter(&mut rng, layer_inputs(x, &store));
    check(&inputs, EPS, |g, v| {
        let bound = Bound::from_vars(v[1..].to_vec());
        let y = lstm.forward(g, &bound, v[0], Mode::Eval)?;
        project(g, y, seed)
    })
    .unwrap()
    .max_rel_error
}

/// FD check of `(1/K) Σ_k loss_k` w.r.t. every parameter of every party.
pub fn end_to_end(variant: Variant, kind: TaskKind, seed: u64) -> f64 {
    let (k, t, d, h, m, batch) = (2, 4, 3, 2, 2, 2);
    let mut cfg = ModelConfig::new(variant, t, h).without_dropout();
    cfg.head_hidden = h;
    cfg.mlp_width = 3;
    let spec = TaskSpec {
        features: d,
        labels: m,
        kind,
    };
    let specs = vec![spec; k];
    let (tasks, shared) = build(&cfg, &specs, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Tensor> = (0..k).map(|_| random(&mut rng, &[batch, t, d], -1.5, 1.5)).collect();
    let ys: Vec<Tensor> = (0..k)
        .map(|_| {
            let data = (0..batch * m)
                .map(|_| match kind {
                    TaskKind::Classification => f64::from(rng.gen_bool(0.5) as u8),
                    TaskKind::Regression => rng.gen_range(-1.0..1.0),
                })
                .collect();
            Tensor::new(vec![batch, m], data).unwrap()
        })
        .collect();

    let sizes: Vec<usize> = tasks.iter().map(|t| t.params.len()).collect();
    let params: Vec<Tensor> = tasks
        .iter()
        .flat_map(|t| t.params.tensors().cloned())
        .chain(shared.params.tensors().cloned())
        .collect();
    let inputs = jitter(&mut rng, params);

    let r = check(&inputs, EPS, |g, v| {
        let mut offset = 0;
        let mut bounds = Vec::new();
        for &n in &sizes {
            bounds.push(Bound::from_vars(v[offset..offset + n].to_vec()));
            offset += n;
        }
        let shared_bound = Bound::from_vars(v[offset..].to_vec());
        let xv: Vec<Var> = xs.iter().map(|x| g.constant(x.clone())).collect();
        let mut modes: Vec<Mode> = (0..k).map(|_| Mode::Eval).collect();
        let outs = forward_all(g, &tasks, &bounds, &shared, &shared_bound, &xv, &mut modes)?;
        let mut total: Option<Var> = None;
        for (i, out) in outs.iter().enumerate() {
            let y = g.constant(ys[i].clone());
            let l = task_loss(g, kind, out.prediction, y)?;
            total = Some(match total {
                None => l,
                Some(acc) => g.add(acc, l)?,
            });
        }
        Ok(g.scale(total.unwrap(), 1.0 / k as f64))
    })
    .unwrap();
    r.max_rel_error
}

