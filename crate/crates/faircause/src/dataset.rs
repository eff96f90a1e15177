//! Labeled datasets and the empirical discrimination measures.
//!
//! A dataset is an ordered, index-addressable list of full rows over a
//! shared schema. Rows are stored as value indices; the CSV form uses the
//! domain value strings verbatim with a header row naming the attributes.

use std::io::{Read, Write};
use std::sync::Arc;

use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::schema::{Assignment, Schema, NEGATIVE, POSITIVE};

/// Count of rows per protected group, negative group first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupCounts {
    pub negative: usize,
    pub positive: usize,
}

impl GroupCounts {
    pub fn total(&self) -> usize {
        self.negative + self.positive
    }

    pub fn of(&self, group: usize) -> usize {
        match group {
            NEGATIVE => self.negative,
            _ => self.positive,
        }
    }
}

/// An immutable table of full assignments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    schema: Arc<Schema>,
    rows: Vec<Vec<u8>>,
}

impl Dataset {
    pub fn new(schema: Arc<Schema>, rows: Vec<Vec<u8>>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::domain(format!(
                    "row {i} has {} values, schema has {} attributes",
                    row.len(),
                    schema.len()
                )));
            }
            for (a, &v) in row.iter().enumerate() {
                if v as usize >= schema.attribute(a).cardinality() {
                    return Err(Error::domain(format!(
                        "row {i}: value index {v} out of range for attribute {:?}",
                        schema.attribute(a).name
                    )));
                }
            }
        }
        Ok(Dataset { schema, rows })
    }

    pub fn from_assignments(schema: Arc<Schema>, rows: &[Assignment]) -> Result<Self> {
        let resolved = rows
            .iter()
            .map(|a| a.resolve_full(&schema))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(schema, resolved)
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn assignment(&self, row: usize) -> Assignment {
        Assignment::from_row(&self.schema, &self.rows[row])
    }

    pub fn group_counts(&self) -> GroupCounts {
        let c = self.schema.protected_index();
        let positive = self.rows.iter().filter(|r| r[c] as usize == POSITIVE).count();
        GroupCounts { negative: self.rows.len() - positive, positive }
    }

    fn require_both_groups(&self) -> Result<GroupCounts> {
        let counts = self.group_counts();
        let domain = &self.schema.protected().domain;
        if counts.positive == 0 {
            return Err(Error::undefined(format!("no rows with {}", domain[POSITIVE])));
        }
        if counts.negative == 0 {
            return Err(Error::undefined(format!("no rows with {}", domain[NEGATIVE])));
        }
        Ok(counts)
    }

    fn matches(&self, row: &[u8], pattern: &[Option<u8>]) -> bool {
        pattern
            .iter()
            .enumerate()
            .all(|(i, v)| v.map_or(true, |v| row[i] == v))
    }

    /// Conditional relative frequency of `query.event` among rows matching
    /// `query.given`.
    pub fn conditional_frequency(&self, query: &FrequencyQuery) -> Result<f64> {
        let event = query.event.resolve(&self.schema)?;
        let given = query.given.resolve(&self.schema)?;
        let mut n_given = 0usize;
        let mut n_both = 0usize;
        for row in &self.rows {
            if self.matches(row, &given) {
                n_given += 1;
                if self.matches(row, &event) {
                    n_both += 1;
                }
            }
        }
        if n_given == 0 {
            return Err(Error::undefined(format!("no rows match {:?}", query.given)));
        }
        Ok(n_both as f64 / n_given as f64)
    }

    /// Per-group positive-label frequencies `(negative group, positive group)`.
    pub fn positive_label_rates(&self) -> Result<[f64; 2]> {
        let counts = self.require_both_groups()?;
        let c = self.schema.protected_index();
        let l = self.schema.label_index();
        let mut pos = [0usize; 2];
        for row in &self.rows {
            if row[l] as usize == POSITIVE {
                pos[row[c] as usize] += 1;
            }
        }
        Ok([
            pos[NEGATIVE] as f64 / counts.negative as f64,
            pos[POSITIVE] as f64 / counts.positive as f64,
        ])
    }

    /// Risk difference of positive labels between the groups.
    pub fn empirical_discrimination(&self) -> Result<f64> {
        let rates = self.positive_label_rates()?;
        Ok(rates[POSITIVE] - rates[NEGATIVE])
    }

    /// Same rows with the label column replaced by the classifier's
    /// predictions.
    pub fn predicted_dataset(&self, h: &Classifier) -> Result<Dataset> {
        if !h.schema().same_space(&self.schema) {
            return Err(Error::domain(
                "classifier attribute space does not match the dataset schema",
            ));
        }
        let l = self.schema.label_index();
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut out = row.clone();
                out[l] = h.predict_index(row);
                out
            })
            .collect();
        Dataset::new(Arc::clone(&self.schema), rows)
    }

    /// Risk difference of the classifier's predictions, computed by the
    /// cell-decomposition route: per group, the prediction indicator of each
    /// observed non-label combination weighted by that combination's
    /// conditional frequency. Agrees exactly with relabeling and measuring.
    pub fn empirical_predicted_discrimination(&self, h: &Classifier) -> Result<f64> {
        if !h.schema().same_space(&self.schema) {
            return Err(Error::domain(
                "classifier attribute space does not match the dataset schema",
            ));
        }
        let counts = self.require_both_groups()?;
        let c = self.schema.protected_index();
        let cells = self.schema.cell_count();
        if cells > usize::MAX as u128 {
            return Err(Error::domain("cell space too large"));
        }
        let mut cell_rows = vec![0usize; cells as usize];
        for row in &self.rows {
            cell_rows[self.schema.cell_code(row)] += 1;
        }
        let mut rate = [0.0f64; 2];
        let mut probe = vec![0u8; self.schema.len()];
        for (code, &n_cell) in cell_rows.iter().enumerate() {
            if n_cell == 0 {
                continue;
            }
            decode_cell(&self.schema, code, &mut probe);
            if h.predict_index(&probe) as usize == POSITIVE {
                let g = probe[c] as usize;
                rate[g] += n_cell as f64 / counts.of(g) as f64;
            }
        }
        Ok(rate[POSITIVE] - rate[NEGATIVE])
    }

    /// Write as CSV with a header row of attribute names.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.schema.attributes().iter().map(|a| a.name.as_str()))?;
        for row in &self.rows {
            w.write_record(
                row.iter()
                    .enumerate()
                    .map(|(i, &v)| self.schema.attribute(i).domain[v as usize].as_str()),
            )?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read CSV produced by [`write_csv`](Self::write_csv); values must match
    /// the schema domains verbatim and the header must name every attribute.
    pub fn read_csv<R: Read>(reader: R, schema: Arc<Schema>) -> Result<Dataset> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let mut column_attr = Vec::with_capacity(headers.len());
        for h in headers.iter() {
            column_attr.push(schema.index_of(h)?);
        }
        let mut seen = vec![false; schema.len()];
        for &a in &column_attr {
            if seen[a] {
                return Err(Error::domain(format!(
                    "duplicate CSV column {:?}",
                    schema.attribute(a).name
                )));
            }
            seen[a] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::domain(format!(
                "CSV misses column {:?}",
                schema.attribute(missing).name
            )));
        }
        let mut rows = Vec::new();
        for record in r.records() {
            let record = record?;
            let mut row = vec![0u8; schema.len()];
            for (col, value) in record.iter().enumerate() {
                let attr = column_attr[col];
                row[attr] = schema.value_index(attr, value)? as u8;
            }
            rows.push(row);
        }
        Dataset::new(schema, rows)
    }
}

/// Fill the non-label coordinates of `probe` from a cell code; the label
/// coordinate is left as-is.
pub(crate) fn decode_cell(schema: &Schema, mut code: usize, probe: &mut [u8]) {
    let label = schema.label_index();
    for i in (0..schema.len()).rev() {
        if i == label {
            continue;
        }
        let k = schema.attribute(i).cardinality();
        probe[i] = (code % k) as u8;
        code /= k;
    }
}

/// An event/condition pair for conditional frequency queries; the two parts
/// must mention disjoint attributes.
#[derive(Debug, Clone)]
pub struct FrequencyQuery {
    event: Assignment,
    given: Assignment,
}

impl FrequencyQuery {
    pub fn new(event: Assignment, given: Assignment) -> Result<Self> {
        for (name, _) in event.iter() {
            if given.get(name).is_some() {
                return Err(Error::domain(format!(
                    "attribute {name:?} appears in both event and condition"
                )));
            }
        }
        Ok(FrequencyQuery { event, given })
    }

    pub fn event(&self) -> &Assignment {
        &self.event
    }

    pub fn given(&self) -> &Assignment {
        &self.given
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::Classifier;
    use crate::fixtures::{d_toy, toy_schema};
    use crate::schema::Assignment;

    fn freq(data: &Dataset, event: &[(&str, &str)], given: &[(&str, &str)]) -> f64 {
        data.conditional_frequency(
            &FrequencyQuery::new(Assignment::from_pairs(event), Assignment::from_pairs(given)).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn toy_counts() {
        let d = d_toy();
        let counts = d.group_counts();
        assert_eq!(counts.positive, 3);
        assert_eq!(counts.negative, 4);
        assert_eq!(counts.total(), 7);
    }

    #[test]
    fn toy_conditional_frequencies() {
        let d = d_toy();
        assert!((freq(&d, &[("l", "l+")], &[("c", "c+")]) - 2.0 / 3.0).abs() < 1e-15);
        assert!((freq(&d, &[("z", "z+")], &[("c", "c-")]) - 0.5).abs() < 1e-15);
        // An event conditioned on itself is certain.
        assert_eq!(freq(&d, &[("z", "z+")], &[("l", "l+")]), 1.0);
    }

    #[test]
    fn empty_condition_errors() {
        let d = d_toy();
        let q = FrequencyQuery::new(
            Assignment::from_pairs(&[("l", "l+")]),
            Assignment::from_pairs(&[("c", "c+"), ("z", "z-"), ("l", "l-")]),
        );
        assert!(q.is_err()); // overlapping attributes
        let q = FrequencyQuery::new(
            Assignment::from_pairs(&[("z", "z+")]),
            Assignment::from_pairs(&[("c", "c+"), ("l", "l+")]),
        )
        .unwrap();
        assert!(d.conditional_frequency(&q).is_ok());
    }

    #[test]
    fn toy_discrimination() {
        let d = d_toy();
        assert!((d.empirical_discrimination().unwrap() - 5.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_groups_have_zero_discrimination() {
        let schema = toy_schema();
        let rows = vec![
            Assignment::from_pairs(&[("c", "c+"), ("z", "z+"), ("l", "l+")]),
            Assignment::from_pairs(&[("c", "c+"), ("z", "z-"), ("l", "l-")]),
            Assignment::from_pairs(&[("c", "c-"), ("z", "z+"), ("l", "l+")]),
            Assignment::from_pairs(&[("c", "c-"), ("z", "z-"), ("l", "l-")]),
        ];
        let d = Dataset::from_assignments(schema, &rows).unwrap();
        assert_eq!(d.empirical_discrimination().unwrap(), 0.0);
    }

    #[test]
    fn empty_group_message_names_group() {
        let schema = toy_schema();
        let rows = vec![Assignment::from_pairs(&[("c", "c+"), ("z", "z+"), ("l", "l+")])];
        let d = Dataset::from_assignments(schema, &rows).unwrap();
        let err = d.empirical_discrimination().unwrap_err();
        assert_eq!(err.to_string(), "undefined conditional: no rows with c-");
    }

    #[test]
    fn predicted_dataset_constant() {
        let d = d_toy();
        let h = Classifier::constant(Arc::clone(d.schema()), POSITIVE as u8);
        let dh = d.predicted_dataset(&h).unwrap();
        let l = d.schema().label_index();
        assert!(dh.rows().iter().all(|r| r[l] as usize == POSITIVE));
        assert_eq!(dh.empirical_discrimination().unwrap(), 0.0);
        assert_eq!(d.empirical_predicted_discrimination(&h).unwrap(), 0.0);
    }

    #[test]
    fn predicted_dataset_z_rule() {
        let d = d_toy();
        let schema = Arc::clone(d.schema());
        let z = schema.index_of("z").unwrap();
        let h = Classifier::from_rule(Arc::clone(&schema), "z rule", |row| {
            (row[z] as usize == POSITIVE) as u8
        });
        let dh = d.predicted_dataset(&h).unwrap();
        let l = schema.label_index();
        let labels: Vec<usize> = dh.rows().iter().map(|r| r[l] as usize).collect();
        assert_eq!(labels, vec![1, 1, 0, 1, 0, 0, 1]);
        // Relabeling is idempotent: the classifier ignores labels.
        assert_eq!(dh.predicted_dataset(&h).unwrap(), dh);
        // The decomposition route agrees with relabel-then-measure.
        let via_formula = d.empirical_predicted_discrimination(&h).unwrap();
        let via_relabel = dh.empirical_discrimination().unwrap();
        assert!((via_formula - via_relabel).abs() < 1e-12);
        assert!((via_formula - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let d = d_toy();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("c,z,l\n"));
        let back = Dataset::read_csv(buf.as_slice(), Arc::clone(d.schema())).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn csv_rejects_unknown_value() {
        let schema = toy_schema();
        let text = "c,z,l\nc+,z+,l?\n";
        assert!(Dataset::read_csv(text.as_bytes(), schema).is_err());
    }

    #[test]
    fn csv_rejects_missing_column() {
        let schema = toy_schema();
        let text = "c,z\nc+,z+\n";
        assert!(Dataset::read_csv(text.as_bytes(), schema).is_err());
    }
}
