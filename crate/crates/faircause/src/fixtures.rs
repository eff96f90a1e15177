//! Shared reference objects: the three-attribute chain model, the
//! seven-row toy dataset, and seeded random generators for property tests.
//! Public so integration tests and downstream benchmarks can reuse them.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classifier::Classifier;
use crate::dataset::Dataset;
use crate::model::{CausalModel, Cpt};
use crate::schema::{schema_arc, Attribute, Role, Schema};

/// Schema of the chain and toy fixtures: binary protected `c`, one binary
/// nonprotected `z`, binary label `l`, negative values first.
pub fn toy_schema() -> Arc<Schema> {
    schema_arc(vec![
        Attribute::new("c", &["c-", "c+"], Role::Protected),
        Attribute::new("z", &["z-", "z+"], Role::Nonprotected),
        Attribute::new("l", &["l-", "l+"], Role::Label),
    ])
    .unwrap()
}

pub fn chain_schema() -> Arc<Schema> {
    toy_schema()
}

/// The c -> z -> l chain: P(c+) = 0.5, P(z+|c+) = 0.8, P(z+|c-) = 0.2,
/// P(l+|z+) = 0.9, P(l+|z-) = 0.1. Its true discrimination is 0.48.
pub fn chain_model() -> CausalModel {
    let schema = chain_schema();
    let cpts = vec![
        Cpt::from_names(&schema, "c", &[], vec![vec![0.5, 0.5]]).unwrap(),
        Cpt::from_names(&schema, "z", &["c"], vec![vec![0.8, 0.2], vec![0.2, 0.8]]).unwrap(),
        Cpt::from_names(&schema, "l", &["z"], vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap(),
    ];
    CausalModel::new(schema, cpts).unwrap()
}

/// Seven-row reference dataset with group counts 3 (c+) and 4 (c-) and a
/// label risk difference of 5/12.
pub fn d_toy() -> Dataset {
    let schema = toy_schema();
    let rows: Vec<Vec<u8>> = vec![
        vec![1, 1, 1], // c+, z+, l+
        vec![1, 1, 1], // c+, z+, l+
        vec![1, 0, 0], // c+, z-, l-
        vec![0, 1, 1], // c-, z+, l+
        vec![0, 0, 0], // c-, z-, l-
        vec![0, 0, 0], // c-, z-, l-
        vec![0, 1, 0], // c-, z+, l-
    ];
    Dataset::new(schema, rows).unwrap()
}

/// Schema with `z_attrs` binary nonprotected attributes.
pub fn wide_schema(z_attrs: usize) -> Arc<Schema> {
    let mut attrs = vec![Attribute::new("c", &["c-", "c+"], Role::Protected)];
    for i in 0..z_attrs {
        attrs.push(Attribute::new(format!("z{i}"), &["0", "1"], Role::Nonprotected));
    }
    attrs.push(Attribute::new("l", &["l-", "l+"], Role::Label));
    schema_arc(attrs).unwrap()
}

/// Uniformly random dataset over a wide schema; rows are i.i.d. uniform over
/// all value combinations.
pub fn random_dataset(n: usize, z_attrs: usize, seed: u64) -> Dataset {
    let schema = wide_schema(z_attrs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| (0..schema.len()).map(|_| rng.gen_range(0..2u8)).collect())
        .collect();
    Dataset::new(schema, rows).unwrap()
}

/// Random admissible model over at most `max_attrs` binary attributes
/// (including the protected attribute and the label): the protected
/// attribute is parentless, the label childless, every other edge is drawn
/// independently, and CPT probabilities stay inside (0.05, 0.95).
pub fn random_model(max_attrs: usize, seed: u64) -> CausalModel {
    assert!(max_attrs >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z_attrs = rng.gen_range(0..=(max_attrs - 2));
    let schema = wide_schema(z_attrs);
    let c = schema.protected_index();
    let l = schema.label_index();
    let z = schema.z_indices();

    let mut cpts = Vec::new();
    let interior = |rng: &mut ChaCha8Rng| {
        let p: f64 = rng.gen_range(0.05..0.95);
        vec![1.0 - p, p]
    };
    cpts.push(Cpt::new(&schema, c, vec![], vec![interior(&mut rng)]).unwrap());
    for (pos, &zi) in z.iter().enumerate() {
        let mut parents = Vec::new();
        if rng.gen_bool(0.5) {
            parents.push(c);
        }
        for &earlier in &z[..pos] {
            if rng.gen_bool(0.5) {
                parents.push(earlier);
            }
        }
        let rows = (0..1usize << parents.len()).map(|_| interior(&mut rng)).collect();
        cpts.push(Cpt::new(&schema, zi, parents, rows).unwrap());
    }
    let mut label_parents = Vec::new();
    if rng.gen_bool(0.5) {
        label_parents.push(c);
    }
    for &zi in &z {
        if rng.gen_bool(0.5) {
            label_parents.push(zi);
        }
    }
    let rows = (0..1usize << label_parents.len()).map(|_| interior(&mut rng)).collect();
    cpts.push(Cpt::new(&schema, l, label_parents, rows).unwrap());

    CausalModel::new(schema, cpts).unwrap()
}

/// The worked flip-policy example: positive group of 100 with confusion
/// (tp=40, fp=10, fn=2, tn=48), negative group of 100 predicted perfectly
/// with 41 positive labels, so the data discrimination is exactly 0.01.
pub fn flip_policy_fixture() -> (Dataset, Classifier) {
    let schema = schema_arc(vec![
        Attribute::new("c", &["c-", "c+"], Role::Protected),
        Attribute::new(
            "z",
            &["z0", "z1", "z2", "z3", "z4", "z5"],
            Role::Nonprotected,
        ),
        Attribute::new("l", &["l-", "l+"], Role::Label),
    ])
    .unwrap();
    let mut rows = Vec::new();
    let push = |rows: &mut Vec<Vec<u8>>, count: usize, c: u8, z: u8, l: u8| {
        for _ in 0..count {
            rows.push(vec![c, z, l]);
        }
    };
    push(&mut rows, 40, 1, 0, 1); // predicted +, actual +  (tp)
    push(&mut rows, 10, 1, 1, 0); // predicted +, actual -  (fp)
    push(&mut rows, 2, 1, 2, 1); // predicted -, actual +  (fn)
    push(&mut rows, 48, 1, 3, 0); // predicted -, actual -  (tn)
    push(&mut rows, 41, 0, 4, 1); // negative group, perfect predictions
    push(&mut rows, 59, 0, 5, 0);
    let data = Dataset::new(Arc::clone(&schema), rows).unwrap();
    let h = Classifier::from_rule(Arc::clone(&schema), "worked example", |row| {
        let c = row[0];
        let z = row[1];
        u8::from((c == 1 && (z == 0 || z == 1)) || (c == 0 && z == 4))
    });
    (data, h)
}
