//! Attribute schemas and value assignments.
//!
//! Every model, dataset, and classifier in this crate shares one `Schema`:
//! an ordered list of named discrete attributes, exactly one of which is the
//! protected attribute and exactly one the decision label. Protected and
//! label attributes are binary with the negative value listed first, so
//! index 0 is always the negative group / negative label and index 1 the
//! positive one.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Role an attribute plays in discrimination analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Protected,
    Label,
    Nonprotected,
}

/// Index of the negative group / negative label inside a binary domain.
pub const NEGATIVE: usize = 0;
/// Index of the positive group / positive label inside a binary domain.
pub const POSITIVE: usize = 1;

/// A named discrete attribute with an ordered domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub domain: Vec<String>,
    pub role: Role,
}

impl Attribute {
    pub fn new(name: impl Into<String>, domain: &[&str], role: Role) -> Self {
        Attribute {
            name: name.into(),
            domain: domain.iter().map(|v| v.to_string()).collect(),
            role,
        }
    }

    pub fn cardinality(&self) -> usize {
        self.domain.len()
    }
}

/// Ordered attribute list with exactly one protected attribute and one label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Schema {
    attributes: Vec<Attribute>,
    #[serde(skip)]
    by_name: BTreeMap<String, usize>,
    #[serde(skip)]
    protected: usize,
    #[serde(skip)]
    label: usize,
}

impl<'de> Deserialize<'de> for Schema {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let attributes = Vec::<Attribute>::deserialize(deserializer)?;
        Schema::new(attributes).map_err(serde::de::Error::custom)
    }
}

impl Schema {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self> {
        let mut by_name = BTreeMap::new();
        let mut protected = None;
        let mut label = None;
        for (i, attr) in attributes.iter().enumerate() {
            if by_name.insert(attr.name.clone(), i).is_some() {
                return Err(Error::domain(format!("duplicate attribute name {:?}", attr.name)));
            }
            if attr.domain.len() < 2 {
                return Err(Error::domain(format!(
                    "attribute {:?} needs at least 2 domain values",
                    attr.name
                )));
            }
            if attr.domain.len() > u8::MAX as usize {
                return Err(Error::domain(format!(
                    "attribute {:?} has more than {} domain values",
                    attr.name,
                    u8::MAX
                )));
            }
            let mut sorted = attr.domain.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != attr.domain.len() {
                return Err(Error::domain(format!(
                    "attribute {:?} has duplicate domain values",
                    attr.name
                )));
            }
            match attr.role {
                Role::Protected => {
                    if protected.replace(i).is_some() {
                        return Err(Error::domain("more than one protected attribute"));
                    }
                }
                Role::Label => {
                    if label.replace(i).is_some() {
                        return Err(Error::domain("more than one label attribute"));
                    }
                }
                Role::Nonprotected => {}
            }
        }
        let protected = protected.ok_or_else(|| Error::domain("no protected attribute"))?;
        let label = label.ok_or_else(|| Error::domain("no label attribute"))?;
        for idx in [protected, label] {
            if attributes[idx].domain.len() != 2 {
                return Err(Error::domain(format!(
                    "attribute {:?} must be binary (negative value first, positive second)",
                    attributes[idx].name
                )));
            }
        }
        Ok(Schema { attributes, by_name, protected, label })
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn attribute(&self, index: usize) -> &Attribute {
        &self.attributes[index]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::domain(format!("unknown attribute {name:?}")))
    }

    pub fn protected_index(&self) -> usize {
        self.protected
    }

    pub fn label_index(&self) -> usize {
        self.label
    }

    pub fn protected(&self) -> &Attribute {
        &self.attributes[self.protected]
    }

    pub fn label(&self) -> &Attribute {
        &self.attributes[self.label]
    }

    /// Indices of the non-protected, non-label attributes, in schema order.
    pub fn z_indices(&self) -> Vec<usize> {
        (0..self.attributes.len())
            .filter(|&i| i != self.protected && i != self.label)
            .collect()
    }

    pub fn value_index(&self, attr: usize, value: &str) -> Result<usize> {
        let a = &self.attributes[attr];
        a.domain
            .iter()
            .position(|v| v == value)
            .ok_or_else(|| Error::domain(format!("unknown value {:?} for attribute {:?}", value, a.name)))
    }

    /// Total number of joint states of all attributes.
    pub fn joint_state_count(&self) -> u128 {
        self.attributes
            .iter()
            .map(|a| a.cardinality() as u128)
            .product()
    }

    /// Number of (protected, nonprotected) cells a classifier must cover.
    pub fn cell_count(&self) -> u128 {
        self.attributes
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.label)
            .map(|(_, a)| a.cardinality() as u128)
            .product()
    }

    /// Mixed-radix code of the non-label coordinates of a full row, used to
    /// index tabular decision cells. Earlier schema positions are more
    /// significant.
    pub fn cell_code(&self, row: &[u8]) -> usize {
        let mut code = 0usize;
        for (i, a) in self.attributes.iter().enumerate() {
            if i == self.label {
                continue;
            }
            code = code * a.cardinality() + row[i] as usize;
        }
        code
    }

    /// True when two schemas describe the same attribute space.
    pub fn same_space(&self, other: &Schema) -> bool {
        self.attributes == other.attributes
    }
}

/// A (possibly partial) map from attribute names to domain values.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(BTreeMap<String, String>);

impl Assignment {
    pub fn new() -> Self {
        Assignment::default()
    }

    pub fn from_pairs(pairs: &[(&str, &str)]) -> Self {
        Assignment(
            pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        )
    }

    pub fn set(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.0.insert(name.into(), value.into());
        self
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.0.get(name).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Resolve against a schema. Returns one `Option<value index>` per
    /// attribute; errors on unknown attributes or values.
    pub fn resolve(&self, schema: &Schema) -> Result<Vec<Option<u8>>> {
        let mut out = vec![None; schema.len()];
        for (name, value) in self.iter() {
            let attr = schema.index_of(name)?;
            out[attr] = Some(schema.value_index(attr, value)? as u8);
        }
        Ok(out)
    }

    /// Resolve a full assignment (every attribute set) to value indices.
    pub fn resolve_full(&self, schema: &Schema) -> Result<Vec<u8>> {
        let partial = self.resolve(schema)?;
        partial
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| {
                    Error::domain(format!(
                        "assignment misses attribute {:?}",
                        schema.attribute(i).name
                    ))
                })
            })
            .collect()
    }

    /// Rebuild from value indices.
    pub fn from_row(schema: &Schema, row: &[u8]) -> Self {
        let mut map = BTreeMap::new();
        for (i, attr) in schema.attributes().iter().enumerate() {
            map.insert(attr.name.clone(), attr.domain[row[i] as usize].clone());
        }
        Assignment(map)
    }
}

/// Convenience constructor used across tests and fixtures.
pub fn schema_arc(attributes: Vec<Attribute>) -> Result<Arc<Schema>> {
    Schema::new(attributes).map(Arc::new)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn czl() -> Vec<Attribute> {
        vec![
            Attribute::new("c", &["c-", "c+"], Role::Protected),
            Attribute::new("z", &["z-", "z+"], Role::Nonprotected),
            Attribute::new("l", &["l-", "l+"], Role::Label),
        ]
    }

    #[test]
    fn builds_and_indexes() {
        let s = Schema::new(czl()).unwrap();
        assert_eq!(s.protected_index(), 0);
        assert_eq!(s.label_index(), 2);
        assert_eq!(s.z_indices(), vec![1]);
        assert_eq!(s.value_index(0, "c+").unwrap(), POSITIVE);
        assert_eq!(s.joint_state_count(), 8);
        assert_eq!(s.cell_count(), 4);
    }

    #[test]
    fn rejects_double_protected() {
        let mut attrs = czl();
        attrs[1].role = Role::Protected;
        assert!(Schema::new(attrs).is_err());
    }

    #[test]
    fn rejects_nonbinary_label() {
        let mut attrs = czl();
        attrs[2].domain.push("l?".to_string());
        assert!(Schema::new(attrs).is_err());
    }

    #[test]
    fn rejects_missing_label() {
        let mut attrs = czl();
        attrs[2].role = Role::Nonprotected;
        assert!(Schema::new(attrs).is_err());
    }

    #[test]
    fn assignment_round_trip() {
        let s = Schema::new(czl()).unwrap();
        let a = Assignment::from_pairs(&[("c", "c+"), ("z", "z-"), ("l", "l+")]);
        let row = a.resolve_full(&s).unwrap();
        assert_eq!(row, vec![1, 0, 1]);
        assert_eq!(Assignment::from_row(&s, &row), a);
    }

    #[test]
    fn assignment_unknown_value_errors() {
        let s = Schema::new(czl()).unwrap();
        let a = Assignment::from_pairs(&[("c", "nope")]);
        assert!(matches!(a.resolve(&s), Err(Error::Domain(_))));
    }

    #[test]
    fn cell_code_skips_label() {
        let s = Schema::new(czl()).unwrap();
        assert_eq!(s.cell_code(&[0, 0, 1]), 0);
        assert_eq!(s.cell_code(&[0, 1, 0]), 1);
        assert_eq!(s.cell_code(&[1, 0, 0]), 2);
        assert_eq!(s.cell_code(&[1, 1, 1]), 3);
    }
}
