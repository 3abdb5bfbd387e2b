use adl_core::evaluation::{confusion, ConfusionMatrix};
use proptest::prelude::*;

const TOL_PP: f64 = 0.005;

fn pct(x: f64) -> f64 {
    x * 100.0
}

fn close(got: f64, want_pct: f64) -> bool {
    (pct(got) - want_pct).abs() <= TOL_PP
}

fn behavior_matrix() -> ConfusionMatrix {
    ConfusionMatrix::from_counts(
        &["lying", "standing", "sitting", "walking"],
        vec![
            vec![19, 8, 3, 0],
            vec![1, 3, 0, 0],
            vec![4, 1, 22, 0],
            vec![0, 0, 0, 12],
        ],
    )
    .unwrap()
}

fn emergency_matrix() -> ConfusionMatrix {
    ConfusionMatrix::from_counts(
        &["non-emergency", "emergency"],
        vec![vec![41, 7], vec![3, 11]],
    )
    .unwrap()
}

#[test]
fn behavior_matrix_metrics() {
    let cm = behavior_matrix();
    assert_eq!(cm.total(), 73);
    assert!(close(cm.accuracy().unwrap(), 76.71));
    let classes = ["lying", "standing", "sitting", "walking"];
    let precision = [63.33, 75.00, 81.48, 100.00];
    let recall = [79.17, 25.00, 88.00, 100.00];
    for (i, c) in classes.iter().enumerate() {
        assert!(
            close(cm.precision(c).unwrap().unwrap(), precision[i]),
            "{}",
            c
        );
        assert!(close(cm.recall(c).unwrap().unwrap(), recall[i]), "{}", c);
    }
}

#[test]
fn emergency_matrix_metrics() {
    let cm = emergency_matrix();
    assert_eq!(cm.total(), 62);
    assert!(close(cm.accuracy().unwrap(), 83.87));
    assert!(close(
        cm.precision("non-emergency").unwrap().unwrap(),
        85.42
    ));
    assert!(close(cm.precision("emergency").unwrap().unwrap(), 78.57));
    assert!(close(cm.recall("non-emergency").unwrap().unwrap(), 93.18));
    assert!(close(cm.recall("emergency").unwrap().unwrap(), 61.11));
}

#[test]
fn rendered_table_layout() {
    let text = behavior_matrix().render();
    assert!(text.contains("class precision"));
    assert!(text.contains("class recall"));
    assert!(text.contains("63.33%"));
    assert!(text.contains("25.00%"));
}

#[test]
fn confusion_from_labels_matches_counts() {
    // expand the emergency matrix back into label pairs
    let cm = emergency_matrix();
    let classes = cm.classes().to_vec();
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for (p, row) in cm.counts().iter().enumerate() {
        for (t, &n) in row.iter().enumerate() {
            for _ in 0..n {
                truth.push(classes[t].clone());
                pred.push(classes[p].clone());
            }
        }
    }
    assert_eq!(confusion(&truth, &pred, &classes).unwrap(), cm);
}

#[test]
fn unknown_class_and_empty_matrix() {
    let cm = emergency_matrix();
    assert!(cm.precision("fall").is_err());
    let empty = ConfusionMatrix::from_counts(&["a", "b"], vec![vec![0, 0], vec![0, 0]]).unwrap();
    assert!(empty.accuracy().is_err());
    assert_eq!(empty.precision("a").unwrap(), None);
}

fn labels(n_classes: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0..n_classes, 0..n_classes), 1..200)
}

proptest! {
    #[test]
    fn sums_and_bounds((n, pairs) in (1usize..6).prop_flat_map(|n| (Just(n), labels(n)))) {
        let classes: Vec<String> = (0..n).map(|i| format!("c{}", i)).collect();
        let truth: Vec<&str> = pairs.iter().map(|p| classes[p.0].as_str()).collect();
        let pred: Vec<&str> = pairs.iter().map(|p| classes[p.1].as_str()).collect();
        let cm = confusion(&truth, &pred, &classes).unwrap();
        prop_assert_eq!(cm.total(), pairs.len() as u64);
        prop_assert_eq!((0..n).map(|j| cm.column_sum(j)).sum::<u64>(), cm.total());
        prop_assert_eq!((0..n).map(|i| cm.row_sum(i)).sum::<u64>(), cm.total());
        let acc = cm.accuracy().unwrap();
        prop_assert!((0.0..=1.0).contains(&acc));
        let hits = pairs.iter().filter(|p| p.0 == p.1).count();
        prop_assert!((acc - hits as f64 / pairs.len() as f64).abs() < 1e-12);
        for c in &classes {
            let present_true = truth.contains(&c.as_str());
            let present_pred = pred.contains(&c.as_str());
            prop_assert_eq!(cm.recall(c).unwrap().is_some(), present_true);
            prop_assert_eq!(cm.precision(c).unwrap().is_some(), present_pred);
        }
    }

    #[test]
    fn permutation_equivariant(
        (n, pairs, perm) in (2usize..6).prop_flat_map(|n| {
            (Just(n), labels(n), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
        })
    ) {
        let classes: Vec<String> = (0..n).map(|i| format!("c{}", i)).collect();
        let permuted: Vec<String> = perm.iter().map(|&i| classes[i].clone()).collect();
        let truth: Vec<&str> = pairs.iter().map(|p| classes[p.0].as_str()).collect();
        let pred: Vec<&str> = pairs.iter().map(|p| classes[p.1].as_str()).collect();
        let a = confusion(&truth, &pred, &classes).unwrap();
        let b = confusion(&truth, &pred, &permuted).unwrap();
        prop_assert_eq!(a.accuracy().unwrap(), b.accuracy().unwrap());
        for c in &classes {
            prop_assert_eq!(a.precision(c).unwrap(), b.precision(c).unwrap());
            prop_assert_eq!(a.recall(c).unwrap(), b.recall(c).unwrap());
        }
    }
}
