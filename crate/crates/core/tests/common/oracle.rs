//! Federation-against-monolith comparisons shared by the federation tests
//! and the acceptance run.

use fathom_core::federated::{contains_f64, Federation, FederationConfig};
use fathom_core::model::{ModelConfig, TaskKind, Variant};

use super::{batches_at, max_abs_diff, specs_of, synth_splits, Monolith};

pub fn small_config(variant: Variant, dropout: bool) -> FederationConfig {
    let mut model = ModelConfig::new(variant, 6, 4);
    model.head_hidden = 5;
    model.mlp_width = 4;
    if !dropout {
        model = model.without_dropout();
    }
    let mut cfg = FederationConfig::new(model, 11);
    cfg.batch_size = 7;
    cfg
}

/// Largest absolute difference between node-partitioned and single-graph
/// gradients (every task and shared parameter) and losses on one batch.
pub fn gradient_gap(variant: Variant, dropout: bool) -> f64 {
    let cfg = small_config(variant, dropout);
    let splits = synth_splits(3, 40, 6, 5, 2, TaskKind::Classification, 3);
    let mut mono = Monolith::new(&cfg.model, &specs_of(&splits), cfg.seed, cfg.adam);
    let positions: Vec<usize> = vec![3, 17, 0, 22, 9];
    let batches = batches_at(&splits, &positions);
    let mut fed = Federation::new(cfg, splits).unwrap();
    let fg = fed.round_gradients(&positions).unwrap();
    let mg = mono.gradients(&batches, true).unwrap();
    assert_eq!(fg.shared.len(), mg.shared_grads.len(), "{variant}");
    let mut gap: f64 = 0.0;
    for (a, b) in fg.nodes.iter().zip(&mg.task_grads) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            gap = gap.max(max_abs_diff(x, y));
        }
    }
    for (x, y) in fg.shared.iter().zip(&mg.shared_grads) {
        gap = gap.max(max_abs_diff(x, y));
    }
    for (r, l) in fg.results.iter().zip(&mg.losses) {
        gap = gap.max((r.loss - l).abs());
    }
    gap
}

/// Two epochs of one-node federated training next to the single-graph
/// trainer; returns the largest loss gap and the final parameter gap.
pub fn trajectory_gap(variant: Variant) -> (f64, f64) {
    let cfg = small_config(variant, true);
    let splits = synth_splits(1, 50, 6, 5, 2, TaskKind::Classification, 8);
    let mut mono = Monolith::new(&cfg.model, &specs_of(&splits), cfg.seed, cfg.adam);
    let mut fed = Federation::new(cfg, splits.clone()).unwrap();
    let mut loss_gap: f64 = 0.0;
    for epoch in 0..2 {
        for positions in fed.epoch_schedule(epoch) {
            let fl = fed.train_round(&positions).unwrap();
            let ml = mono.step(&batches_at(&splits, &positions)).unwrap();
            assert_eq!(fl.len(), 1);
            loss_gap = loss_gap.max((fl[0] - ml[0]).abs());
        }
    }
    let mut param_gap: f64 = 0.0;
    for (a, b) in fed.task_params()[0].tensors().zip(mono.tasks[0].params.tensors()) {
        param_gap = param_gap.max(max_abs_diff(a, b));
    }
    for (a, b) in fed.shared_params().tensors().zip(mono.shared.params.tensors()) {
        param_gap = param_gap.max(max_abs_diff(a, b));
    }
    (loss_gap, param_gap)
}

pub const CANARY: f64 = 7_919.123_456_789_012;

/// Plants the canary in every seventh input value, trains `rounds` rounds
/// and scans every node-to-coordinator payload. Returns the number of
/// payloads scanned and how many contained the canary.
pub fn canary_scan(variant: Variant, rounds: usize) -> (usize, usize, Federation) {
    let mut cfg = small_config(variant, true);
    cfg.capture_uplink = true;
    let mut splits = synth_splits(3, 40, 6, 5, 2, TaskKind::Classification, 5);
    for s in &mut splits {
        for (i, v) in s.train.x.iter_mut().enumerate() {
            if i % 7 == 0 {
                *v = CANARY;
            }
        }
    }
    let mut fed = Federation::new(cfg, splits).unwrap();
    let mut done = 0;
    'outer: for epoch in 0.. {
        for positions in fed.epoch_schedule(epoch) {
            fed.train_round(&positions).unwrap();
            done += 1;
            if done == rounds {
                break 'outer;
            }
        }
    }
    let uplink = fed.log().uplink_bytes();
    let leaks = uplink.iter().filter(|b| contains_f64(b, CANARY)).count();
    (uplink.len(), leaks, fed)
}
