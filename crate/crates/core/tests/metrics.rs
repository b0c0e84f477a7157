use fathom_core::metrics::{classification_metrics, export_attention, find_spikes, smape, AttentionRecord};
use proptest::prelude::*;

fn binary(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop::bool::ANY.prop_map(|b| b as u8 as f64), n)
}

proptest! {
    #[test]
    fn f1_lies_between_precision_and_recall(
        (truth, probs) in (1usize..60).prop_flat_map(|n| (binary(n), prop::collection::vec(0.0f64..1.0, n)))
    ) {
        let r = classification_metrics(&probs, &truth, 1, 0.5).unwrap();
        let s = &r.per_label[0];
        prop_assert_eq!(s.confusion.total(), truth.len());
        for v in [s.precision, s.recall, s.f1, s.balanced_accuracy] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        if s.precision > 0.0 && s.recall > 0.0 {
            prop_assert!(s.f1 <= s.precision.max(s.recall) + 1e-15);
            prop_assert!(s.f1 >= s.precision.min(s.recall) - 1e-15);
        }
    }

    #[test]
    fn balanced_accuracy_survives_polarity_swap(
        (truth, pred) in (1usize..60).prop_flat_map(|n| (binary(n), binary(n)))
    ) {
        let flip = |v: &[f64]| v.iter().map(|x| 1.0 - x).collect::<Vec<_>>();
        let a = classification_metrics(&pred, &truth, 1, 0.5).unwrap();
        let b = classification_metrics(&flip(&pred), &flip(&truth), 1, 0.5).unwrap();
        prop_assert!((a.balanced_accuracy - b.balanced_accuracy).abs() < 1e-15);
    }

    #[test]
    fn smape_is_symmetric_and_bounded(
        (a, b) in (1usize..40).prop_flat_map(|n| (
            prop::collection::vec(-100.0f64..100.0, n),
            prop::collection::vec(-100.0f64..100.0, n),
        ))
    ) {
        let ab = smape(&a, &b).unwrap();
        prop_assert_eq!(ab, smape(&b, &a).unwrap());
        prop_assert!((0.0..=2.0).contains(&ab));
    }
}

#[test]
fn smape_both_zero_term_is_zero() {
    assert_eq!(smape(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
    assert_eq!(smape(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
}

#[test]
fn macro_scores_average_labels() {
    // Label 0 perfect, label 1 all wrong.
    let truth = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
    let probs = [0.9, 1.0, 0.1, 0.0, 0.8, 0.7];
    let r = classification_metrics(&probs, &truth, 2, 0.5).unwrap();
    assert_eq!(r.per_label[0].f1, 1.0);
    assert_eq!(r.per_label[1].f1, 0.0);
    assert_eq!(r.f1, 0.5);
    assert_eq!(r.balanced_accuracy, 0.5);
}

fn random_rows(steps: usize, d: usize, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..steps {
        let raw: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0f64..3.0).exp()).collect();
        let total: f64 = raw.iter().sum();
        out.extend(raw.iter().map(|v| v / total));
    }
    out
}

#[test]
fn exported_rows_sum_to_one_after_reimport() {
    let (steps, d) = (6, 5);
    let records: Vec<AttentionRecord> = (0..4)
        .map(|i| AttentionRecord {
            task_id: format!("t{}", i % 2),
            window_index: i,
            feature_names: (0..d).map(|f| format!("f{f}")).collect(),
            steps,
            sensor_attention: Some(random_rows(steps, d, i as u64)),
            time_attention: Some(random_rows(1, steps, 100 + i as u64)),
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let files = export_attention(&records, dir.path(), 3.0).unwrap();
    assert_eq!(files.len(), records.len() + 1);
    for path in &files[..records.len()] {
        let mut reader = csv::Reader::from_path(path).unwrap();
        assert_eq!(reader.headers().unwrap().len(), 1 + d + 1);
        let mut time_total = 0.0;
        let mut rows = 0;
        for rec in reader.records() {
            let rec = rec.unwrap();
            let vals: Vec<f64> = rec.iter().skip(1).map(|c| c.parse().unwrap()).collect();
            assert!((vals[..d].iter().sum::<f64>() - 1.0).abs() < 1e-6);
            time_total += vals[d];
            rows += 1;
        }
        assert_eq!(rows, steps);
        assert!((time_total - 1.0).abs() < 1e-6);
    }
    let spikes = csv::Reader::from_path(&files[records.len()]).unwrap().records().count();
    assert_eq!(spikes, find_spikes(&records, 3.0).len());
}

#[test]
fn export_needs_records_and_a_writable_directory() {
    let dir = tempfile::tempdir().unwrap();
    assert!(export_attention(&[], dir.path(), 3.0).is_err());
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let rec = AttentionRecord {
        task_id: "t".into(),
        window_index: 0,
        feature_names: vec!["a".into()],
        steps: 1,
        sensor_attention: Some(vec![1.0]),
        time_attention: None,
    };
    let err = export_attention(&[rec], &blocker.join("sub"), 3.0).unwrap_err();
    assert!(matches!(err, fathom_core::Error::Io { .. }), "{err}");
}
