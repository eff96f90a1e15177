//! Property tests over randomized models, datasets, and classifiers.

use std::sync::Arc;

use proptest::prelude::*;

use faircause::classifier::{error_bias, train_tabular, train_tree, Classifier, TieRule};
use faircause::fixtures::{random_dataset, random_model};
use faircause::model_io::{model_from_json, model_to_json};
use faircause::removal::{massage, FlipKind};
use faircause::schema::Assignment;

fn cell_rule(schema: Arc<faircause::Schema>, mask: u64) -> Classifier {
    let s = Arc::clone(&schema);
    Classifier::from_rule(schema, "random cells", move |row| {
        ((mask >> (s.cell_code(row) % 64)) & 1) as u8
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Both discrimination measures stay inside [-1, 1], and the two routes
    /// to the prediction measure (cell decomposition vs relabel-and-measure)
    /// agree exactly.
    #[test]
    fn discrimination_measures_bounded_and_consistent(
        seed in any::<u64>(),
        n in 2usize..400,
        z_attrs in 1usize..4,
        mask in any::<u64>(),
    ) {
        let data = random_dataset(n, z_attrs, seed);
        let counts = data.group_counts();
        prop_assume!(counts.negative > 0 && counts.positive > 0);

        let de_d = data.empirical_discrimination().unwrap();
        prop_assert!((-1.0..=1.0).contains(&de_d));

        let h = cell_rule(Arc::clone(data.schema()), mask);
        let via_formula = data.empirical_predicted_discrimination(&h).unwrap();
        prop_assert!((-1.0..=1.0).contains(&via_formula));
        let via_relabel = data.predicted_dataset(&h).unwrap().empirical_discrimination().unwrap();
        prop_assert!((via_formula - via_relabel).abs() < 1e-12);

        // The gap identity, one more time with arbitrary masks.
        let eps = error_bias(&data, &h).unwrap().epsilon;
        prop_assert!((via_formula - de_d - eps).abs() < 1e-12);
        prop_assert!((-2.0..=2.0).contains(&eps));
    }

    /// Massaging only rewrites labels, alternates promotion/demotion kinds,
    /// never increases |DE_D|, and its flip log replays to the returned
    /// dataset.
    #[test]
    fn massage_contract(
        seed in any::<u64>(),
        n in 4usize..300,
        z_attrs in 1usize..4,
        tau in 0.0f64..0.3,
    ) {
        let data = random_dataset(n, z_attrs, seed);
        let counts = data.group_counts();
        prop_assume!(counts.negative > 0 && counts.positive > 0);
        let ranker = train_tabular(&data, TieRule::default()).unwrap();
        let out = massage(&data, &ranker, tau).unwrap();

        let de_before = data.empirical_discrimination().unwrap();
        prop_assert!(out.de_d_after.abs() <= de_before.abs() + 1e-12);
        if out.reached_target {
            prop_assert!(out.de_d_after.abs() <= tau + 1e-9);
        }

        // labels-only
        let l = data.schema().label_index();
        for (before, after) in data.rows().iter().zip(out.dataset.rows()) {
            for i in 0..before.len() {
                if i != l {
                    prop_assert_eq!(before[i], after[i]);
                }
            }
        }

        // alternation and kind/group consistency
        let c = data.schema().protected_index();
        for pair in out.flips.windows(2) {
            prop_assert_ne!(pair[0].kind, pair[1].kind);
        }
        for flip in &out.flips {
            let group = data.rows()[flip.row_index][c] as usize;
            match flip.kind {
                FlipKind::Promotion => prop_assert_eq!(group, 0),
                FlipKind::Demotion => prop_assert_eq!(group, 1),
            }
        }

        // replaying the log reproduces the dataset
        let mut rows = data.rows().to_vec();
        for flip in &out.flips {
            let v = data.schema().value_index(l, &flip.new_label).unwrap();
            rows[flip.row_index][l] = v as u8;
        }
        prop_assert_eq!(&rows, out.dataset.rows());
        let recomputed = out.dataset.empirical_discrimination().unwrap();
        prop_assert!((recomputed - out.de_d_after).abs() < 1e-12);
    }

    /// Model files round-trip value-identically.
    #[test]
    fn model_json_round_trip(seed in any::<u64>()) {
        let model = random_model(6, seed);
        let json = model_to_json(&model).unwrap();
        let back = model_from_json(&json).unwrap();
        prop_assert_eq!(model_to_json(&back).unwrap(), json);
        prop_assert!(
            (back.true_discrimination().unwrap() - model.true_discrimination().unwrap()).abs()
                < 1e-15
        );
    }

    /// Classifier serialization preserves every prediction, for both
    /// trainers and arbitrary depths.
    #[test]
    fn classifier_json_round_trip(
        seed in any::<u64>(),
        n in 2usize..200,
        depth in 1u32..6,
        tabular in any::<bool>(),
    ) {
        let data = random_dataset(n, 2, seed);
        prop_assume!(!data.is_empty());
        let h = if tabular {
            train_tabular(&data, TieRule::default()).unwrap()
        } else {
            train_tree(&data, depth, TieRule::default()).unwrap()
        };
        let back = Classifier::from_json(&h.to_json().unwrap()).unwrap();
        let schema = data.schema();
        let mut probe = vec![0u8; schema.len()];
        for code in 0..schema.cell_count() as usize {
            // decode the cell into a probe row
            let mut rest = code;
            for i in (0..schema.len()).rev() {
                if i == schema.label_index() { continue; }
                let k = schema.attribute(i).cardinality();
                probe[i] = (rest % k) as u8;
                rest /= k;
            }
            prop_assert_eq!(back.predict_index(&probe), h.predict_index(&probe));
            prop_assert_eq!(back.positive_score(&probe), h.positive_score(&probe));
        }
    }

    /// Interventional label probabilities form a distribution: the two
    /// label events sum to 1 for either intervention value.
    #[test]
    fn interventional_normalization(seed in any::<u64>()) {
        let model = random_model(6, seed);
        let schema = model.schema();
        let c = schema.protected().name.clone();
        let l = schema.label().name.clone();
        for group in schema.protected().domain.clone() {
            let total: f64 = schema
                .label()
                .domain
                .clone()
                .into_iter()
                .map(|label| {
                    model
                        .interventional_probability(
                            &Assignment::new().set(c.clone(), group.clone()),
                            &Assignment::new().set(l.clone(), label),
                        )
                        .unwrap()
                })
                .sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
