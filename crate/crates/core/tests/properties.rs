//! Property tests for the algebraic invariants of the measures and the weak
//! learner criterion.

use proptest::prelude::*;

use spamboost::boost::Distribution;
use spamboost::dataset::{build_vocabulary, vectorize, Document, Label};
use spamboost::eval::{
    f_beta_from, metrics, pr_operating_points, weighted_accuracy, ContingencyTable, ScoredSet,
};
use spamboost::weaklearn::{block_z, leaf_predictions, SmoothingPolicy, WeightQuad};

fn table_strategy() -> impl Strategy<Value = ContingencyTable> {
    (0usize..200, 0usize..200, 0usize..200, 0usize..200).prop_map(|(a, b, c, d)| {
        ContingencyTable {
            s_plus: a,
            s_minus: b,
            l_plus: c,
            l_minus: d,
        }
    })
}

proptest! {
    #[test]
    fn z_of_normalized_quads_is_at_most_one(
        a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, d in 0.0f64..1.0
    ) {
        let total = a + b + c + d;
        prop_assume!(total > 0.0);
        let q = WeightQuad {
            pos_holds: a / total,
            neg_holds: b / total,
            pos_not: c / total,
            neg_not: d / total,
        };
        let z = block_z(q);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&z));
    }

    #[test]
    fn balanced_blocks_give_z_exactly_one(a in 1e-6f64..1.0, b in 1e-6f64..1.0) {
        let total = 2.0 * (a + b);
        let q = WeightQuad {
            pos_holds: a / total,
            neg_holds: a / total,
            pos_not: b / total,
            neg_not: b / total,
        };
        prop_assert!((block_z(q) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn leaf_prediction_signs_follow_the_masses(
        a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, d in 0.0f64..1.0
    ) {
        let s = SmoothingPolicy::new(1e-4).unwrap();
        let q = WeightQuad { pos_holds: a, neg_holds: b, pos_not: c, neg_not: d };
        let (holds, not) = leaf_predictions(q, s);
        prop_assert_eq!(holds > 0.0, a > b);
        prop_assert_eq!(holds < 0.0, a < b);
        prop_assert_eq!(not > 0.0, c > d);
        prop_assert!(holds.is_finite() && not.is_finite());
    }

    #[test]
    fn f_beta_lies_between_precision_and_recall(
        table in table_strategy(), beta in 0.25f64..4.0
    ) {
        let m = metrics(&table, beta);
        if let (Some(p), Some(r), Some(f)) = (m.precision, m.recall, m.f_beta) {
            let lo = p.min(r);
            let hi = p.max(r);
            prop_assert!(f >= lo - 1e-12 && f <= hi + 1e-12, "F{beta} = {f} not in [{lo}, {hi}]");
        }
    }

    #[test]
    fn f1_is_the_harmonic_mean(p in 1e-6f64..1.0, r in 1e-6f64..1.0) {
        let f1 = f_beta_from(p, r, 1.0).unwrap();
        let harmonic = 2.0 / (1.0 / p + 1.0 / r);
        prop_assert!((f1 - harmonic).abs() < 1e-12);
    }

    #[test]
    fn weighted_accuracy_at_one_is_accuracy(table in table_strategy()) {
        prop_assume!(table.total() > 0);
        let acc = metrics(&table, 1.0).accuracy.unwrap();
        prop_assert_eq!(weighted_accuracy(&table, 1.0), acc);
    }

    #[test]
    fn weighted_accuracy_monotone_in_correct_cells(
        table in table_strategy(), lambda in 1.0f64..1000.0
    ) {
        // moving one legitimate mistake to a correct classification,
        // holding class totals fixed, never lowers WAcc
        prop_assume!(table.l_plus > 0);
        let improved = ContingencyTable {
            l_plus: table.l_plus - 1,
            l_minus: table.l_minus + 1,
            ..table
        };
        prop_assert!(weighted_accuracy(&improved, lambda) >= weighted_accuracy(&table, lambda));

        // same for a recovered spam message
        prop_assume!(table.s_minus > 0);
        let improved = ContingencyTable {
            s_minus: table.s_minus - 1,
            s_plus: table.s_plus + 1,
            ..table
        };
        prop_assert!(weighted_accuracy(&improved, lambda) >= weighted_accuracy(&table, lambda));
    }

    #[test]
    fn distributions_normalize(weights in proptest::collection::vec(0.0f64..10.0, 1..50)) {
        prop_assume!(weights.iter().sum::<f64>() > 0.0);
        let d = Distribution::from_weights(weights).unwrap();
        prop_assert!((d.sum() - 1.0).abs() < 1e-10);
        prop_assert!(d.weights().iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn pr_recall_never_increases_with_theta(
        scores in proptest::collection::vec(-5.0f64..5.0, 1..60),
        flags in proptest::collection::vec(any::<bool>(), 1..60),
    ) {
        let n = scores.len().min(flags.len());
        let mut labels: Vec<Label> = flags[..n]
            .iter()
            .map(|&b| if b { Label::Spam } else { Label::Legit })
            .collect();
        labels[0] = Label::Spam;
        let set = ScoredSet::new(scores[..n].to_vec(), labels).unwrap();
        let ops = pr_operating_points(&set).unwrap();
        for w in ops.windows(2) {
            prop_assert!(w[0].recall >= w[1].recall);
        }
        // the all-spam end has full recall, the all-legit end zero recall
        prop_assert_eq!(ops.first().unwrap().recall, 1.0);
        prop_assert_eq!(ops.last().unwrap().recall, 0.0);
    }

    #[test]
    fn vectorization_is_stable_and_sorted(texts in proptest::collection::vec("[a-e ]{0,20}", 1..12)) {
        let docs: Vec<Document> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document {
                tokens: t.split_whitespace().map(str::to_owned).collect(),
                label: if i % 2 == 0 { Label::Spam } else { Label::Legit },
                origin_fold: None,
                source_id: format!("doc{i}"),
            })
            .collect();
        let vocab = build_vocabulary(&docs);
        let ds = vectorize(&docs, &vocab);
        let again = vectorize(&docs, &vocab);
        prop_assert_eq!(&ds, &again);
        for i in 0..ds.len() {
            let row = ds.row(i);
            prop_assert!(row.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(row.iter().all(|&f| (f as usize) < vocab.len()));
        }
    }
}
