use blinkscan_core::eval::roc::roc;
use blinkscan_core::Error;
use proptest::prelude::*;

/// P(score of a positive > score of a negative), ties counting one half.
fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2usize..1000)
        .prop_flat_map(|n| {
            (
                // Coarse scores so ties occur.
                prop::collection::vec((0u32..50).prop_map(|v| v as f64 / 49.0), n),
                prop::collection::vec(0u8..2, n),
            )
        })
        .prop_filter("both classes", |(_, l)| l.contains(&0) && l.contains(&1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn trapezoid_matches_pairwise((scores, labels) in instance()) {
        let c = roc(&scores, &labels).unwrap();
        prop_assert!((c.auc - pairwise_auc(&scores, &labels)).abs() < 1e-9);
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((c.auc + roc(&neg, &labels).unwrap().auc - 1.0).abs() < 1e-9);
        let mut unique = scores.clone();
        unique.sort_by(f64::total_cmp);
        unique.dedup();
        prop_assert_eq!(c.points.len(), unique.len() + 2);
        for w in c.points.windows(2) {
            prop_assert!(w[0].fpr <= w[1].fpr && w[0].tpr <= w[1].tpr);
        }
    }
}

#[test]
fn worked_example_is_three_quarters() {
    let c = roc(&[0.9, 0.8, 0.3, 0.2], &[1, 0, 1, 0]).unwrap();
    assert_eq!(c.auc, 0.75);
    assert_eq!(c.points.len(), 6);
}

#[test]
fn single_class_is_an_error() {
    assert!(matches!(roc(&[0.1, 0.2], &[1, 1]), Err(Error::SingleClass)));
    assert!(roc(&[f64::NAN, 0.2], &[0, 1]).is_err());
}
