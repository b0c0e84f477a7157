mod common;

use fathom_core::model::{build, central_attention, forward_all, task_loss, ModelConfig, TaskKind, TaskSpec, Variant};
use fathom_core::nn::{Activation, AdamConfig, Dense, Initializer, Mode, ParamStore};
use fathom_core::tensor::{Graph, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::Monolith;

fn random(rng: &mut ChaCha8Rng, dims: Vec<usize>, scale: f64) -> Tensor {
    let n = dims.iter().product();
    Tensor::new(dims, (0..n).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

fn scaled(x: &Tensor, s: f64) -> Tensor {
    Tensor::new(x.dims().to_vec(), x.data().iter().map(|v| v * s).collect()).unwrap()
}

fn shifted(x: &Tensor, c: f64) -> Tensor {
    Tensor::new(x.dims().to_vec(), x.data().iter().map(|v| v + c).collect()).unwrap()
}

fn zeroed(store: &mut ParamStore) {
    let zeros = store.tensors().map(|t| Tensor::zeros(t.dims().to_vec()).unwrap()).collect();
    store.load_values(zeros).unwrap();
}

fn specs(k: usize, d: usize, m: usize, kind: TaskKind) -> Vec<TaskSpec> {
    (0..k).map(|_| TaskSpec { features: d, labels: m, kind }).collect()
}

#[test]
fn zero_parameters_predict_one_half() {
    for variant in Variant::ALL {
        let cfg = ModelConfig::new(variant, 4, 3);
        let (mut tasks, mut shared) = build(&cfg, &specs(2, 4, 3, TaskKind::Classification), 1).unwrap();
        tasks.iter_mut().for_each(|t| zeroed(&mut t.params));
        zeroed(&mut shared.params);
        let mut g = Graph::new();
        let bound: Vec<_> = tasks.iter().map(|t| t.params.bind(&mut g)).collect();
        let sb = shared.params.bind(&mut g);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<Var> = (0..2).map(|_| g.constant(random(&mut rng, vec![5, 4, 4], 3.0))).collect();
        let mut modes = vec![Mode::Eval, Mode::Eval];
        let outs = forward_all(&mut g, &tasks, &bound, &shared, &sb, &xs, &mut modes).unwrap();
        for o in outs {
            assert_eq!(g.dims(o.prediction), &[5, 3]);
            assert!(g.value(o.prediction).data().iter().all(|&v| v == 0.5), "{variant}");
        }
    }
}

#[test]
fn classification_outputs_stay_inside_unit_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for variant in Variant::ALL {
        for seed in 0..5 {
            let cfg = ModelConfig::new(variant, 5, 4);
            let (tasks, shared) = build(&cfg, &specs(3, 4, 2, TaskKind::Classification), seed).unwrap();
            let mut g = Graph::new();
            let bound: Vec<_> = tasks.iter().map(|t| t.params.bind(&mut g)).collect();
            let sb = shared.params.bind(&mut g);
            let xs: Vec<Var> = (0..3).map(|_| g.constant(random(&mut rng, vec![6, 5, 4], 10.0))).collect();
            let mut modes = vec![Mode::Eval, Mode::Eval, Mode::Eval];
            let outs = forward_all(&mut g, &tasks, &bound, &shared, &sb, &xs, &mut modes).unwrap();
            for o in outs {
                assert!(g.value(o.prediction).data().iter().all(|&v| v > 0.0 && v < 1.0));
            }
        }
    }
}

// Straight-line recomputation of the central attention with plain loops.
fn brute_force_central(
    hiddens: &[Tensor],
    inputs: &[Tensor],
    w: &Tensor,
    b: &Tensor,
    t: usize,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut f = Vec::new();
    for step in 0..t {
        for h in hiddens {
            let width = h.dims()[2];
            f.extend_from_slice(&h.data()[step * width..(step + 1) * width]);
        }
    }
    let u: Vec<f64> = (0..t)
        .map(|j| {
            let z: f64 = f.iter().enumerate().map(|(i, v)| v * w.at(&[i, j])).sum::<f64>() + b.data()[j];
            z.tanh()
        })
        .collect();
    let max = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = u.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let a: Vec<f64> = exps.iter().map(|e| e / total).collect();
    let contexts = inputs
        .iter()
        .map(|x| {
            let d = x.dims()[2];
            (0..t * d).map(|i| x.data()[i] * a[i / d]).collect()
        })
        .collect();
    (a, contexts)
}

#[test]
fn central_attention_matches_brute_force() {
    let (t, h, d) = (3, 2, 4);
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let score = Dense::new(&mut store, "c", t * 2 * h, t, Activation::Tanh, &mut Initializer::new(seed));
        *store.get_mut(score.bias) = random(&mut rng, vec![t], 0.5);
        let hs: Vec<Tensor> = (0..2).map(|_| random(&mut rng, vec![1, t, h], 1.0)).collect();
        let xs: Vec<Tensor> = (0..2).map(|_| random(&mut rng, vec![1, t, d], 2.0)).collect();
        let mut g = Graph::new();
        let p = store.bind(&mut g);
        let hv: Vec<Var> = hs.iter().map(|x| g.constant(x.clone())).collect();
        let xv: Vec<Var> = xs.iter().map(|x| g.constant(x.clone())).collect();
        let (cs, a) = central_attention(&mut g, &score, &p, &hv, &xv).unwrap();
        let (a_ref, c_ref) = brute_force_central(&hs, &xs, store.get(score.weight), store.get(score.bias), t);
        for (x, y) in g.value(a).data().iter().zip(&a_ref) {
            assert!((x - y).abs() < 1e-12);
        }
        for (c, r) in cs.iter().zip(&c_ref) {
            for (x, y) in g.value(*c).data().iter().zip(r) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn uniform_attention_equals_prescaled_inputs() {
    // With both scorers zeroed, the second pass sees X / T.
    let (k, t, d, h) = (3, 5, 4, 3);
    let cfg = ModelConfig::new(Variant::Fathom, t, h);
    let (mut tasks, mut shared) = build(&cfg, &specs(k, d, 2, TaskKind::Classification), 4).unwrap();
    zeroed(&mut shared.params);
    for task in &mut tasks {
        let names: Vec<String> = task.params.entries().iter().map(|e| e.name.clone()).collect();
        let values = task
            .params
            .tensors()
            .zip(&names)
            .map(|(v, n)| {
                if n.starts_with("sensor") {
                    Tensor::zeros(v.dims().to_vec()).unwrap()
                } else {
                    v.clone()
                }
            })
            .collect();
        task.params.load_values(values).unwrap();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let raw: Vec<Tensor> = (0..k).map(|_| random(&mut rng, vec![4, t, d], 2.0)).collect();

    let mut g = Graph::new();
    let bound: Vec<_> = tasks.iter().map(|m| m.params.bind(&mut g)).collect();
    let sb = shared.params.bind(&mut g);
    let xs: Vec<Var> = raw.iter().map(|x| g.constant(x.clone())).collect();
    let mut modes: Vec<Mode> = (0..k).map(|_| Mode::Eval).collect();
    let outs = forward_all(&mut g, &tasks, &bound, &shared, &sb, &xs, &mut modes).unwrap();

    let ones = g.constant(Tensor::full(vec![4, t], 1.0).unwrap());
    for (i, task) in tasks.iter().enumerate() {
        let scaled = g.constant(scaled(&raw[i], 1.0 / t as f64));
        let reference = task.decode(&mut g, &bound[i], scaled, ones, Mode::Eval).unwrap();
        let got = g.value(outs[i].prediction).clone();
        assert!(common::max_abs_diff(&got, g.value(reference)) < 1e-9);
        let enc = outs[i].sensor_attention.unwrap();
        assert!(g.value(enc).data().iter().all(|v| (v - 1.0 / d as f64).abs() < 1e-15));
    }
}

#[test]
fn overfits_eight_separable_windows() {
    let (t, d, n) = (4, 3, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let batches: Vec<(Tensor, Tensor)> = (0..2)
        .map(|_| {
            let y: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
            let x: Vec<f64> = (0..n * t * d)
                .map(|j| {
                    let sign = if y[j / (t * d)] == 1.0 { 1.0 } else { -1.0 };
                    sign + rng.gen_range(-0.3..0.3)
                })
                .collect();
            (Tensor::new(vec![n, t, d], x).unwrap(), Tensor::new(vec![n, 1], y).unwrap())
        })
        .collect();
    let cfg = ModelConfig::new(Variant::Fathom, t, 4).without_dropout();
    let adam = AdamConfig {
        learning_rate: 0.01,
        ..AdamConfig::default()
    };
    let mut mono = Monolith::new(&cfg, &specs(2, d, 1, TaskKind::Classification), 3, adam);
    let mut last = f64::INFINITY;
    for step in 0..2000 {
        let losses = mono.step(&batches).unwrap();
        last = losses.iter().cloned().fold(0.0, f64::max);
        if last < 0.01 {
            eprintln!("converged after {} steps", step + 1);
            break;
        }
    }
    assert!(last < 0.01, "loss {last}");
}

#[test]
fn shared_trunk_variants_need_equal_features() {
    let cfg = ModelConfig::new(Variant::MLstm, 4, 3);
    let specs = vec![
        TaskSpec { features: 3, labels: 1, kind: TaskKind::Regression },
        TaskSpec { features: 5, labels: 1, kind: TaskKind::Regression },
    ];
    assert!(build(&cfg, &specs, 0).is_err());
    let cfg = ModelConfig::new(Variant::Fathom, 4, 3);
    assert!(build(&cfg, &specs, 0).is_ok());
}

#[test]
fn regression_loss_of_heads_is_translation_magnitude() {
    let mut g = Graph::new();
    let y = Tensor::new(vec![3, 2], vec![0.5, -1.0, 2.0, 0.0, 1.5, 3.0]).unwrap();
    let pred = g.constant(shifted(&y, -0.75));
    let target = g.constant(y);
    let l = task_loss(&mut g, TaskKind::Regression, pred, target).unwrap();
    assert!((g.value(l).item() - 0.75).abs() < 1e-15);
}
