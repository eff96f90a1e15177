//! Model file format.
//!
//! A model is a JSON document with three fields:
//!
//! * `attributes`: ordered list of `{name, domain, role}`;
//! * `edges`: list of `[parent, child]` pairs;
//! * `cpts`: one entry per attribute with the child name, the parent order,
//!   and a `rows` object keyed by the comma-joined parent values (the empty
//!   key for parentless attributes), each mapping to a probability vector
//!   over the child domain.
//!
//! Loading and saving round-trips value-identically. Domain values may not
//! contain commas, since they appear inside row keys.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{advance, CausalModel, Cpt};
use crate::schema::{Attribute, Schema};

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    attributes: Vec<Attribute>,
    edges: Vec<(String, String)>,
    cpts: Vec<CptFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CptFile {
    child: String,
    parents: Vec<String>,
    rows: BTreeMap<String, Vec<f64>>,
}

const KEY_SEPARATOR: &str = ",";

fn check_separator(schema: &Schema) -> Result<()> {
    for attr in schema.attributes() {
        for value in &attr.domain {
            if value.contains(KEY_SEPARATOR) {
                return Err(Error::domain(format!(
                    "domain value {value:?} of {:?} contains {KEY_SEPARATOR:?}, which the model \
                     file format reserves for row keys",
                    attr.name
                )));
            }
        }
    }
    Ok(())
}

/// All parent-combination keys of a CPT, in row-index order.
fn row_keys(schema: &Schema, parents: &[usize]) -> Vec<String> {
    if parents.is_empty() {
        return vec![String::new()];
    }
    let mut keys = Vec::new();
    let mut counter = vec![0u8; parents.len()];
    loop {
        keys.push(
            parents
                .iter()
                .zip(&counter)
                .map(|(&p, &v)| schema.attribute(p).domain[v as usize].clone())
                .collect::<Vec<_>>()
                .join(KEY_SEPARATOR),
        );
        if !advance(&mut counter, |slot| schema.attribute(parents[slot]).cardinality()) {
            break;
        }
    }
    keys
}

/// Parse a model from its JSON text.
pub fn model_from_json(text: &str) -> Result<CausalModel> {
    let file: ModelFile = serde_json::from_str(text)?;
    let schema = Arc::new(Schema::new(file.attributes)?);
    check_separator(&schema)?;

    let mut cpts = Vec::with_capacity(file.cpts.len());
    let mut edge_set: Vec<(String, String)> = Vec::new();
    for entry in &file.cpts {
        let child = schema.index_of(&entry.child)?;
        let parents = entry
            .parents
            .iter()
            .map(|p| schema.index_of(p))
            .collect::<Result<Vec<_>>>()?;
        let keys = row_keys(&schema, &parents);
        let mut rows = Vec::with_capacity(keys.len());
        for key in &keys {
            let row = entry.rows.get(key).ok_or_else(|| {
                Error::domain(format!(
                    "CPT for {:?} misses the row for parent combination {key:?}",
                    entry.child
                ))
            })?;
            rows.push(row.clone());
        }
        if entry.rows.len() != keys.len() {
            let extra: Vec<&String> =
                entry.rows.keys().filter(|k| !keys.contains(k)).collect();
            return Err(Error::domain(format!(
                "CPT for {:?} has unknown row keys {extra:?}",
                entry.child
            )));
        }
        for p in &entry.parents {
            edge_set.push((p.clone(), entry.child.clone()));
        }
        cpts.push(Cpt::new(&schema, child, parents, rows)?);
    }

    let mut declared = file.edges.clone();
    declared.sort();
    edge_set.sort();
    if declared != edge_set {
        return Err(Error::domain(
            "edge list does not match the parent lists of the CPTs",
        ));
    }

    CausalModel::new(schema, cpts)
}

/// Serialize a model to its JSON document.
pub fn model_to_json(model: &CausalModel) -> Result<String> {
    let schema = model.schema();
    check_separator(schema)?;
    let mut edges = Vec::new();
    let mut cpts = Vec::new();
    for cpt in model.cpts() {
        let child = schema.attribute(cpt.child()).name.clone();
        let parents: Vec<String> = cpt
            .parents()
            .iter()
            .map(|&p| schema.attribute(p).name.clone())
            .collect();
        for p in &parents {
            edges.push((p.clone(), child.clone()));
        }
        let keys = row_keys(schema, cpt.parents());
        let rows = keys
            .into_iter()
            .zip(cpt.rows().iter().cloned())
            .collect::<BTreeMap<_, _>>();
        cpts.push(CptFile { child, parents, rows });
    }
    edges.sort();
    let file = ModelFile { attributes: schema.attributes().to_vec(), edges, cpts };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<CausalModel> {
    let text = fs::read_to_string(path.as_ref())
        .map_err(|e| Error::domain(format!("cannot read {}: {e}", path.as_ref().display())))?;
    model_from_json(&text)
}

pub fn save_model(model: &CausalModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_json(model)? + "\n")?;
    Ok(())
}

/// Read just the attribute list from a model file or a standalone schema
/// file (`{"attributes": [...]}`).
pub fn load_schema(path: impl AsRef<Path>) -> Result<Arc<Schema>> {
    let text = fs::read_to_string(path.as_ref())
        .map_err(|e| Error::domain(format!("cannot read {}: {e}", path.as_ref().display())))?;
    schema_from_json(&text)
}

pub fn schema_from_json(text: &str) -> Result<Arc<Schema>> {
    #[derive(Deserialize)]
    struct SchemaFile {
        attributes: Vec<Attribute>,
    }
    let file: SchemaFile = serde_json::from_str(text)?;
    Ok(Arc::new(Schema::new(file.attributes)?))
}
