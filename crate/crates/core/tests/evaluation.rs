mod common;

use common::{planted_workload, rng};
use proptest::prelude::*;
use rand::Rng;
use sqlsess_core::evaluation::{agreement, cohens_kappa, fleiss_kappa, full_agreement, score};
use sqlsess_core::Label::{self, Continue, Segment};

#[test]
fn worked_confusion_example() {
    // 2 true segments found, 8 continues kept, one miss each way
    let truth = [vec![Segment; 3], vec![Continue; 9]].concat();
    let pred = [vec![Segment, Segment, Continue], vec![Segment], vec![Continue; 8]].concat();
    let r = score(&pred, &truth).unwrap();
    assert_eq!((r.confusion.ss, r.confusion.cc, r.confusion.sc, r.confusion.cs), (2, 8, 1, 1));
    assert_eq!(r.accuracy, 10.0 / 12.0);
    assert_eq!(r.precision, 2.0 / 3.0);
    assert_eq!(r.recall, 2.0 / 3.0);
    assert!((r.f_measure - 2.0 / 3.0).abs() < 1e-15);
}

fn uniform(seed: u64, n: usize) -> Vec<Label> {
    let mut r = rng(seed);
    (0..n).map(|_| Label::from_bool(r.random_bool(0.5))).collect()
}

#[test]
fn independent_raters_have_near_zero_kappa() {
    let n = 10_000;
    let (a, b, c) = (uniform(1, n), uniform(2, n), uniform(3, n));
    assert!(cohens_kappa(&a, &b).unwrap().abs() <= 0.05);
    let matrix: Vec<Vec<Label>> = (0..n).map(|i| vec![a[i], b[i], c[i]]).collect();
    assert!(fleiss_kappa(&matrix).unwrap().abs() <= 0.05);
    // three fair coins agree a quarter of the time
    assert!((full_agreement(&matrix).unwrap() - 0.25).abs() < 0.02);
}

#[test]
fn agreement_on_workload_columns() {
    let mut w = planted_workload(4, 10);
    let truth = w.require_labels("ground_truth").unwrap();
    let flipped: Vec<Label> = truth.iter().map(|l| common::flip(*l)).collect();
    w.set_predictions("same", &truth).unwrap();
    w.set_predictions("flipped", &flipped).unwrap();
    let cols = vec!["ground_truth".to_string(), "pred_same".to_string(), "flipped".to_string()];
    let r = agreement(&w, &cols).unwrap();
    assert_eq!(r.cohen[0][1], 1.0);
    let p = truth.iter().filter(|l| l.is_segment()).count() as f64 / truth.len() as f64;
    let chance = 2.0 * p * (1.0 - p);
    assert!((r.cohen[0][2] - (-chance / (1.0 - chance))).abs() < 1e-12);
    assert_eq!(r.full_agreement, 0.0);
    assert_eq!(r.joint.len(), 8);
    assert_eq!(r.joint.iter().map(|j| j.count).sum::<usize>(), w.num_queries());
}

fn labels() -> impl Strategy<Value = Vec<Label>> {
    prop::collection::vec(any::<bool>().prop_map(Label::from_bool), 1..200)
}

proptest! {
    #[test]
    fn identical_sequences_have_kappa_one(a in labels()) {
        prop_assert_eq!(cohens_kappa(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn scores_are_bounded(a in labels(), seed in any::<u64>()) {
        let b = uniform(seed, a.len());
        let r = score(&a, &b).unwrap();
        for v in [r.accuracy, r.precision, r.recall, r.f_measure] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert_eq!(r.confusion.total(), a.len());
    }
}
