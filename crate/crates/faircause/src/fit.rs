//! CPT estimation for a fixed DAG.
//!
//! Structure learning is out of scope: the parent structure is given and
//! only the conditional frequencies are estimated, optionally with Laplace
//! smoothing.

use std::sync::Arc;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{CausalModel, Cpt};
use crate::schema::Schema;

/// A parent structure over named attributes, given as (parent, child) edges.
/// The parent order of each child follows the edge listing order.
#[derive(Debug, Clone)]
pub struct Dag {
    edges: Vec<(String, String)>,
}

impl Dag {
    pub fn new(edges: &[(&str, &str)]) -> Self {
        Dag {
            edges: edges.iter().map(|(p, c)| (p.to_string(), c.to_string())).collect(),
        }
    }

    pub fn from_edges(edges: Vec<(String, String)>) -> Self {
        Dag { edges }
    }

    pub fn edges(&self) -> &[(String, String)] {
        &self.edges
    }

    /// The saturated structure on a schema: the protected attribute feeds
    /// every nonprotected attribute, earlier nonprotected attributes feed
    /// later ones, and everything feeds the label. Fitting it reproduces the
    /// empirical joint distribution exactly.
    pub fn complete(schema: &Schema) -> Self {
        let c = schema.protected().name.clone();
        let l = schema.label().name.clone();
        let z: Vec<String> = schema
            .z_indices()
            .into_iter()
            .map(|i| schema.attribute(i).name.clone())
            .collect();
        let mut edges = Vec::new();
        for zi in &z {
            edges.push((c.clone(), zi.clone()));
        }
        for i in 0..z.len() {
            for j in (i + 1)..z.len() {
                edges.push((z[i].clone(), z[j].clone()));
            }
        }
        edges.push((c.clone(), l.clone()));
        for zi in &z {
            edges.push((zi.clone(), l.clone()));
        }
        Dag { edges }
    }

    fn parents_of(&self, child: &str) -> Vec<&str> {
        self.edges
            .iter()
            .filter(|(_, c)| c == child)
            .map(|(p, _)| p.as_str())
            .collect()
    }
}

/// Estimate one CPT per attribute from conditional frequencies:
/// `(count + alpha) / (row_total + alpha * child_cardinality)`.
/// With `alpha == 0`, a parent combination that never occurs in the data is
/// an error naming the combination.
pub fn fit_cpts(dag: &Dag, data: &Dataset, alpha: f64) -> Result<CausalModel> {
    if alpha < 0.0 {
        return Err(Error::domain("smoothing must be nonnegative"));
    }
    let schema = data.schema();
    for (p, c) in dag.edges() {
        schema.index_of(p)?;
        let child = schema.index_of(c)?;
        if child == schema.protected_index() {
            return Err(Error::domain(format!(
                "protected attribute {c:?} must have no parents"
            )));
        }
        if schema.index_of(p)? == schema.label_index() {
            return Err(Error::domain(format!("label {p:?} must have no children")));
        }
        if p == c {
            return Err(Error::domain(format!("self edge on {c:?}")));
        }
    }

    let mut cpts = Vec::with_capacity(schema.len());
    for attr in 0..schema.len() {
        let name = &schema.attribute(attr).name;
        let parents: Vec<usize> = dag
            .parents_of(name)
            .into_iter()
            .map(|p| schema.index_of(p))
            .collect::<Result<_>>()?;
        let k = schema.attribute(attr).cardinality();
        let row_count: usize = parents
            .iter()
            .map(|&p| schema.attribute(p).cardinality())
            .product();
        let mut counts = vec![vec![0u64; k]; row_count];
        let probe = Cpt::new(schema, attr, parents.clone(), vec![vec![0.0; k]; row_count])?;
        for row in data.rows() {
            counts[probe.row_index(schema, row)][row[attr] as usize] += 1;
        }
        let mut rows = Vec::with_capacity(row_count);
        for (r, count_row) in counts.iter().enumerate() {
            let total: u64 = count_row.iter().sum();
            if total == 0 && alpha == 0.0 {
                return Err(Error::UndefinedRow {
                    child: name.clone(),
                    combination: probe.combination_label(schema, r),
                });
            }
            let denom = total as f64 + alpha * k as f64;
            rows.push(count_row.iter().map(|&c| (c as f64 + alpha) / denom).collect());
        }
        cpts.push(Cpt::new(schema, attr, parents, rows)?);
    }
    let model = CausalModel::new(Arc::clone(schema), cpts)?;
    if model.topological_order().is_err() {
        return Err(Error::domain("parent structure has a cycle"));
    }
    Ok(model)
}
