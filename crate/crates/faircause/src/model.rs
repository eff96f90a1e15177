//! Discrete Markovian causal models.
//!
//! A model is a DAG over the schema's attributes plus one conditional
//! probability table per attribute. The label mechanism can be replaced by a
//! deterministic classifier, which turns the model of the population into the
//! model of that classifier's predictions; every query below works for both
//! forms. Exact queries enumerate joint states, capped by a configurable
//! state budget.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::classifier::Classifier;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::schema::{Assignment, Schema, NEGATIVE, POSITIVE};

/// Default cap on the number of joint states an exact query may enumerate.
pub const DEFAULT_STATE_CAP: u64 = 1 << 20;

/// Conditional probability table of one attribute given its parents.
///
/// Rows are indexed by the mixed-radix code of the parent values in declared
/// parent order (first parent most significant); each row is a probability
/// vector over the child's domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    child: usize,
    parents: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn new(schema: &Schema, child: usize, parents: Vec<usize>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if child >= schema.len() {
            return Err(Error::domain("CPT child index out of range"));
        }
        for &p in &parents {
            if p >= schema.len() {
                return Err(Error::domain("CPT parent index out of range"));
            }
            if p == child {
                return Err(Error::domain(format!(
                    "attribute {:?} cannot be its own parent",
                    schema.attribute(child).name
                )));
            }
        }
        let expected: u128 = parents
            .iter()
            .map(|&p| schema.attribute(p).cardinality() as u128)
            .product();
        if rows.len() as u128 != expected {
            return Err(Error::domain(format!(
                "CPT for {:?} has {} rows, expected {} (one per parent combination)",
                schema.attribute(child).name,
                rows.len(),
                expected
            )));
        }
        let k = schema.attribute(child).cardinality();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::domain(format!(
                "CPT rows for {:?} must have {} entries",
                schema.attribute(child).name,
                k
            )));
        }
        Ok(Cpt { child, parents, rows })
    }

    /// Build from string names and probability rows listed in row-index order.
    pub fn from_names(schema: &Schema, child: &str, parents: &[&str], rows: Vec<Vec<f64>>) -> Result<Self> {
        let child = schema.index_of(child)?;
        let parents = parents
            .iter()
            .map(|p| schema.index_of(p))
            .collect::<Result<Vec<_>>>()?;
        Cpt::new(schema, child, parents, rows)
    }

    pub fn child(&self) -> usize {
        self.child
    }

    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Row index for the parent values found in a full row of value indices.
    pub fn row_index(&self, schema: &Schema, full: &[u8]) -> usize {
        let mut idx = 0usize;
        for &p in &self.parents {
            idx = idx * schema.attribute(p).cardinality() + full[p] as usize;
        }
        idx
    }

    pub fn prob(&self, schema: &Schema, full: &[u8], child_value: u8) -> f64 {
        self.rows[self.row_index(schema, full)][child_value as usize]
    }

    /// Parent combination behind a row index, rendered as `a=v, b=w`.
    pub fn combination_label(&self, schema: &Schema, mut row: usize) -> String {
        if self.parents.is_empty() {
            return "(no parents)".to_string();
        }
        let mut values = vec![0usize; self.parents.len()];
        for (slot, &p) in self.parents.iter().enumerate().rev() {
            let k = schema.attribute(p).cardinality();
            values[slot] = row % k;
            row /= k;
        }
        self.parents
            .iter()
            .zip(&values)
            .map(|(&p, &v)| {
                let a = schema.attribute(p);
                format!("{}={}", a.name, a.domain[v])
            })
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// One admissibility violation found by [`CausalModel::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Cycle { attributes: Vec<String> },
    RowNotNormalized { child: String, combination: String, sum: f64 },
    EntryOutOfRange { child: String, combination: String, value: f64 },
    MissingRows { child: String, expected: u64, found: u64 },
    ProtectedHasParents { parents: Vec<String> },
    LabelHasChildren { children: Vec<String> },
    NonBinaryProtected { cardinality: usize },
    NonBinaryLabel { cardinality: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Cycle { attributes } => {
                write!(f, "parent relation has a cycle involving {}", attributes.join(", "))
            }
            Violation::RowNotNormalized { child, combination, sum } => {
                write!(f, "CPT row of {child} given {combination} sums to {sum}, not 1")
            }
            Violation::EntryOutOfRange { child, combination, value } => {
                write!(f, "CPT entry of {child} given {combination} is {value}, outside [0, 1]")
            }
            Violation::MissingRows { child, expected, found } => {
                write!(f, "CPT of {child} has {found} rows, expected {expected}")
            }
            Violation::ProtectedHasParents { parents } => {
                write!(f, "protected attribute has parents {}", parents.join(", "))
            }
            Violation::LabelHasChildren { children } => {
                write!(f, "label has child {}", children.join(", "))
            }
            Violation::NonBinaryProtected { cardinality } => {
                write!(f, "protected attribute has {cardinality} values, expected 2")
            }
            Violation::NonBinaryLabel { cardinality } => {
                write!(f, "label has {cardinality} values, expected 2")
            }
        }
    }
}

/// Outcome of validating a model; empty means admissible.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            write!(f, "model is admissible")
        } else {
            for v in &self.violations {
                writeln!(f, "- {v}")?;
            }
            Ok(())
        }
    }
}

/// A discrete Markovian causal model, optionally with its label mechanism
/// replaced by a deterministic classifier.
///
/// Immutable after construction; queries are pure and safe to run
/// concurrently.
#[derive(Debug, Clone)]
pub struct CausalModel {
    schema: Arc<Schema>,
    cpts: Vec<Cpt>,
    label_override: Option<Classifier>,
    state_cap: u64,
}

impl CausalModel {
    /// Assemble a model from one CPT per attribute. Shape problems (wrong
    /// row counts, unknown attributes, duplicate children) fail here;
    /// admissibility problems are reported by [`validate`](Self::validate).
    pub fn new(schema: Arc<Schema>, cpts: Vec<Cpt>) -> Result<Self> {
        if cpts.len() != schema.len() {
            return Err(Error::domain(format!(
                "model needs {} CPTs, got {}",
                schema.len(),
                cpts.len()
            )));
        }
        let mut ordered: Vec<Option<Cpt>> = (0..schema.len()).map(|_| None).collect();
        for cpt in cpts {
            let child = cpt.child();
            if ordered[child].replace(cpt).is_some() {
                return Err(Error::domain(format!(
                    "duplicate CPT for attribute {:?}",
                    schema.attribute(child).name
                )));
            }
        }
        let cpts = ordered.into_iter().map(Option::unwrap).collect();
        Ok(CausalModel { schema, cpts, label_override: None, state_cap: DEFAULT_STATE_CAP })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn cpt(&self, name: &str) -> Result<&Cpt> {
        Ok(&self.cpts[self.schema.index_of(name)?])
    }

    pub fn label_override(&self) -> Option<&Classifier> {
        self.label_override.as_ref()
    }

    /// Replace the enumeration budget (number of joint states).
    pub fn with_state_cap(mut self, cap: u64) -> Self {
        self.state_cap = cap;
        self
    }

    pub fn state_cap(&self) -> u64 {
        self.state_cap
    }

    /// Check every admissibility invariant and report all violations.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let schema = &*self.schema;

        if self.topological_order().is_err() {
            let cyclic = self.attributes_in_cycles();
            violations.push(Violation::Cycle { attributes: cyclic });
        }

        for cpt in &self.cpts {
            let child = schema.attribute(cpt.child()).name.clone();
            let expected: u128 = cpt
                .parents()
                .iter()
                .map(|&p| schema.attribute(p).cardinality() as u128)
                .product();
            if cpt.rows().len() as u128 != expected {
                violations.push(Violation::MissingRows {
                    child,
                    expected: expected as u64,
                    found: cpt.rows().len() as u64,
                });
                continue;
            }
            for (r, row) in cpt.rows().iter().enumerate() {
                let combination = cpt.combination_label(schema, r);
                for &v in row {
                    if !(0.0..=1.0).contains(&v) {
                        violations.push(Violation::EntryOutOfRange {
                            child: child.clone(),
                            combination: combination.clone(),
                            value: v,
                        });
                    }
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    violations.push(Violation::RowNotNormalized {
                        child: child.clone(),
                        combination,
                        sum,
                    });
                }
            }
        }

        let protected = schema.protected_index();
        if !self.cpts[protected].parents().is_empty() {
            violations.push(Violation::ProtectedHasParents {
                parents: self.cpts[protected]
                    .parents()
                    .iter()
                    .map(|&p| schema.attribute(p).name.clone())
                    .collect(),
            });
        }
        let label = schema.label_index();
        let children: Vec<String> = self
            .cpts
            .iter()
            .filter(|c| c.parents().contains(&label))
            .map(|c| schema.attribute(c.child()).name.clone())
            .collect();
        if !children.is_empty() {
            violations.push(Violation::LabelHasChildren { children });
        }

        if schema.protected().cardinality() != 2 {
            violations.push(Violation::NonBinaryProtected {
                cardinality: schema.protected().cardinality(),
            });
        }
        if schema.label().cardinality() != 2 {
            violations.push(Violation::NonBinaryLabel { cardinality: schema.label().cardinality() });
        }

        ValidationReport { violations }
    }

    /// Attribute order for ancestral sampling: parents before children, ties
    /// between incomparable attributes broken by name.
    pub fn topological_order(&self) -> std::result::Result<Vec<usize>, ()> {
        let n = self.schema.len();
        let mut indegree = vec![0usize; n];
        for cpt in &self.cpts {
            indegree[cpt.child()] = cpt.parents().len();
        }
        let mut order = Vec::with_capacity(n);
        let mut placed = vec![false; n];
        while order.len() < n {
            let next = (0..n)
                .filter(|&i| !placed[i] && indegree[i] == 0)
                .min_by(|&a, &b| self.schema.attribute(a).name.cmp(&self.schema.attribute(b).name));
            let Some(next) = next else { return Err(()) };
            placed[next] = true;
            order.push(next);
            for cpt in &self.cpts {
                if cpt.parents().contains(&next) && !placed[cpt.child()] {
                    indegree[cpt.child()] -= 1;
                }
            }
        }
        Ok(order)
    }

    fn attributes_in_cycles(&self) -> Vec<String> {
        // Everything that cannot be topologically placed sits in or below a cycle.
        let n = self.schema.len();
        let mut indegree = vec![0usize; n];
        for cpt in &self.cpts {
            indegree[cpt.child()] = cpt.parents().len();
        }
        let mut placed = vec![false; n];
        loop {
            let Some(next) = (0..n).find(|&i| !placed[i] && indegree[i] == 0) else { break };
            placed[next] = true;
            for cpt in &self.cpts {
                if cpt.parents().contains(&next) && !placed[cpt.child()] {
                    indegree[cpt.child()] -= 1;
                }
            }
        }
        (0..n)
            .filter(|&i| !placed[i])
            .map(|i| self.schema.attribute(i).name.clone())
            .collect()
    }

    /// Probability factor of one attribute at a full joint state, honoring
    /// the classifier override for the label.
    fn factor(&self, attr: usize, full: &[u8]) -> f64 {
        if attr == self.schema.label_index() {
            if let Some(h) = &self.label_override {
                return if h.predict_index(full) == full[attr] { 1.0 } else { 0.0 };
            }
        }
        self.cpts[attr].prob(&self.schema, full, full[attr])
    }

    fn check_states(&self, states: u128) -> Result<()> {
        if states > self.state_cap as u128 {
            return Err(Error::ResourceLimit { required: states, cap: self.state_cap });
        }
        Ok(())
    }

    /// Probability of one full joint assignment under the factorization.
    pub fn joint_probability(&self, assignment: &Assignment) -> Result<f64> {
        if self.label_override.is_some() {
            return Err(Error::domain(
                "joint probability is undefined when the label mechanism is a classifier; \
                 query the prediction model through its discrimination measures",
            ));
        }
        let full = assignment.resolve_full(&self.schema)?;
        Ok((0..self.schema.len()).map(|i| self.factor(i, &full)).product())
    }

    /// Post-intervention probability of a label event: the protected
    /// attribute is fixed by `intervention`, every other mechanism stays,
    /// and all non-protected non-label combinations are summed out.
    pub fn interventional_probability(&self, intervention: &Assignment, event: &Assignment) -> Result<f64> {
        let schema = &*self.schema;
        let do_vals = intervention.resolve(schema)?;
        let ev_vals = event.resolve(schema)?;
        let protected = schema.protected_index();
        let label = schema.label_index();
        let c_value = do_vals[protected].ok_or_else(|| {
            Error::domain("intervention must set the protected attribute")
        })?;
        if do_vals.iter().enumerate().any(|(i, v)| i != protected && v.is_some()) {
            return Err(Error::domain("intervention may only set the protected attribute"));
        }
        let l_value = ev_vals[label]
            .ok_or_else(|| Error::domain("event must set the label attribute"))?;
        if ev_vals.iter().enumerate().any(|(i, v)| i != label && v.is_some()) {
            return Err(Error::domain("event may only set the label attribute"));
        }

        let z = schema.z_indices();
        let states: u128 = z.iter().map(|&i| schema.attribute(i).cardinality() as u128).product();
        self.check_states(states)?;

        let mut full = vec![0u8; schema.len()];
        full[protected] = c_value;
        full[label] = l_value;
        let mut total = 0.0;
        let mut counter = vec![0u8; z.len()];
        loop {
            for (slot, &attr) in z.iter().enumerate() {
                full[attr] = counter[slot];
            }
            let mut term = 1.0;
            for i in 0..schema.len() {
                if i == protected {
                    continue;
                }
                term *= self.factor(i, &full);
            }
            total += term;
            if !advance(&mut counter, |slot| schema.attribute(z[slot]).cardinality()) {
                break;
            }
        }
        Ok(total)
    }

    /// Risk difference of positive labels between the two groups, computed
    /// exactly from the joint distribution. Equals the interventional
    /// difference whenever the protected attribute is parentless.
    pub fn true_discrimination(&self) -> Result<f64> {
        let schema = &*self.schema;
        self.check_states(schema.joint_state_count())?;
        let protected = schema.protected_index();
        let label = schema.label_index();

        let mut group = [0.0f64; 2];
        let mut pos = [0.0f64; 2];
        let mut full = vec![0u8; schema.len()];
        loop {
            let p: f64 = (0..schema.len()).map(|i| self.factor(i, &full)).product();
            let g = full[protected] as usize;
            group[g] += p;
            if full[label] as usize == POSITIVE {
                pos[g] += p;
            }
            if !advance(&mut full, |i| schema.attribute(i).cardinality()) {
                break;
            }
        }
        for (g, idx) in [(NEGATIVE, NEGATIVE), (POSITIVE, POSITIVE)] {
            if group[g] == 0.0 {
                return Err(Error::undefined(format!(
                    "group {} has probability 0",
                    schema.protected().domain[idx]
                )));
            }
        }
        Ok(pos[POSITIVE] / group[POSITIVE] - pos[NEGATIVE] / group[NEGATIVE])
    }

    /// Draw `n` rows by ancestral sampling. Row `i` consumes the ChaCha8
    /// stream `i` of `seed`, so identical `(model, n, seed)` give identical
    /// datasets and prefixes agree across different `n`.
    pub fn sample(&self, n: u64, seed: u64) -> Result<Dataset> {
        if self.label_override.is_some() {
            return Err(Error::domain(
                "sampling requires CPT mechanisms; relabel a sampled dataset to realize a classifier's predictions",
            ));
        }
        if n == 0 {
            return Err(Error::domain("sample size must be at least 1"));
        }
        let order = self
            .topological_order()
            .map_err(|_| Error::domain("cannot sample: parent relation has a cycle"))?;
        let schema = &self.schema;
        let mut rows = Vec::with_capacity(n as usize);
        for i in 0..n {
            let mut rng = stream_rng(seed, i);
            let mut full = vec![0u8; schema.len()];
            for &attr in &order {
                let cpt = &self.cpts[attr];
                let row = &cpt.rows()[cpt.row_index(schema, &full)];
                let u: f64 = rng.gen();
                full[attr] = pick(row, u);
            }
            rows.push(full);
        }
        Dataset::new(Arc::clone(schema), rows)
    }

    /// Copy of this model with the label mechanism replaced by `h`.
    pub fn with_classifier(&self, h: Classifier) -> Result<CausalModel> {
        if !h.schema().same_space(&self.schema) {
            return Err(Error::domain(
                "classifier attribute space does not match the model schema",
            ));
        }
        let mut out = self.clone();
        out.label_override = Some(h);
        Ok(out)
    }

    /// Drop a classifier override, restoring the CPT label mechanism.
    pub fn without_classifier(&self) -> CausalModel {
        let mut out = self.clone();
        out.label_override = None;
        out
    }
}

/// Advance a mixed-radix counter; returns false after the last state.
pub(crate) fn advance(counter: &mut [u8], radix: impl Fn(usize) -> usize) -> bool {
    for slot in (0..counter.len()).rev() {
        counter[slot] += 1;
        if (counter[slot] as usize) < radix(slot) {
            return true;
        }
        counter[slot] = 0;
    }
    false
}

fn pick(probs: &[f64], u: f64) -> u8 {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i as u8;
        }
    }
    (probs.len() - 1) as u8
}
