//! Complete categorical samples and their sufficient statistics.
//!
//! Category indices follow first appearance in the input, and parent
//! configurations are enumerated row-major over the declared parent list
//! (the last parent varies fastest). Every table in the crate relies on these
//! two layouts.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::modelspace::DagModel;

/// Largest number of parent configurations a single family may have.
pub const MAX_CONFIGURATIONS: usize = 1 << 26;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableSpec {
    name: String,
    labels: Vec<String>,
}

impl VariableSpec {
    pub fn new(name: impl Into<String>, labels: Vec<String>) -> Result<Self> {
        let name = name.into();
        if labels.len() < 2 {
            return Err(Error::DegenerateVariable {
                name,
                observed: labels.len(),
            });
        }
        let mut seen = HashMap::with_capacity(labels.len());
        for (k, l) in labels.iter().enumerate() {
            if let Some(prev) = seen.insert(l.as_str(), k) {
                return Err(Error::validation(format!(
                    "variable `{name}`: label `{l}` repeated at positions {prev} and {k}"
                )));
            }
        }
        Ok(Self { name, labels })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn cardinality(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Options for [`CategoricalDataset::load_csv`].
#[derive(Debug, Clone, Copy)]
pub struct CsvOptions {
    pub has_header: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self { has_header: true }
    }
}

/// An immutable, fully observed sample of `n` cases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoricalDataset {
    variables: Vec<VariableSpec>,
    // row-major, n * variables.len()
    values: Vec<usize>,
    n: usize,
}

impl CategoricalDataset {
    pub fn new(variables: Vec<VariableSpec>, rows: Vec<Vec<usize>>) -> Result<Self> {
        let width = variables.len();
        let n = rows.len();
        let mut values = Vec::with_capacity(n * width);
        for (t, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(Error::validation(format!(
                    "case {t} has {} values, expected {width}",
                    row.len()
                )));
            }
            for (i, &v) in row.iter().enumerate() {
                if v >= variables[i].cardinality() {
                    return Err(Error::validation(format!(
                        "case {t}: value {v} out of range for `{}` (cardinality {})",
                        variables[i].name(),
                        variables[i].cardinality()
                    )));
                }
            }
            values.extend(row);
        }
        Ok(Self {
            variables,
            values,
            n,
        })
    }

    /// Parses comma-separated records. Labels are numbered by first appearance.
    pub fn load_csv<R: Read>(source: R, options: CsvOptions) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(source);

        let mut names: Option<Vec<String>> = None;
        let mut labels: Vec<Vec<String>> = Vec::new();
        let mut lookup: Vec<HashMap<String, usize>> = Vec::new();
        let mut values = Vec::new();
        let mut n = 0usize;
        let mut width: Option<usize> = None;

        for (idx, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(idx as u64 + 1, |p| p.line());
            match width {
                None => {
                    width = Some(record.len());
                    labels = vec![Vec::new(); record.len()];
                    lookup = vec![HashMap::new(); record.len()];
                }
                Some(w) if w != record.len() => {
                    return Err(Error::Parse {
                        line,
                        message: format!("expected {w} fields, found {}", record.len()),
                    });
                }
                Some(_) => {}
            }
            if options.has_header && names.is_none() {
                let header: Vec<String> = record.iter().map(str::to_owned).collect();
                if let Some(col) = header.iter().position(String::is_empty) {
                    return Err(Error::Parse {
                        line,
                        message: format!("empty variable name in column {}", col + 1),
                    });
                }
                names = Some(header);
                continue;
            }
            for (i, field) in record.iter().enumerate() {
                if field.is_empty() {
                    return Err(Error::IncompleteSample {
                        line,
                        column: i + 1,
                    });
                }
                let k = match lookup[i].get(field) {
                    Some(&k) => k,
                    None => {
                        let k = labels[i].len();
                        lookup[i].insert(field.to_owned(), k);
                        labels[i].push(field.to_owned());
                        k
                    }
                };
                values.push(k);
            }
            n += 1;
        }

        let width = width.unwrap_or(0);
        let names = names.unwrap_or_else(|| (1..=width).map(|i| format!("X{i}")).collect());
        let variables = names
            .into_iter()
            .zip(labels)
            .map(|(name, labels)| VariableSpec::new(name, labels))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            variables,
            values,
            n,
        })
    }

    /// Writes the header followed by every case in stored order.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(sink);
        let io = |e: csv::Error| Error::validation(format!("csv write: {e}"));
        w.write_record(self.variables.iter().map(VariableSpec::name))
            .map_err(io)?;
        for t in 0..self.n {
            w.write_record(self.record(t)).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<csv>".into(),
            source: e,
        })
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("labels are UTF-8")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn variable(&self, i: usize) -> &VariableSpec {
        &self.variables[i]
    }

    pub fn cardinality(&self, i: usize) -> usize {
        self.variables[i].cardinality()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name() == name)
    }

    pub fn row(&self, t: usize) -> &[usize] {
        let w = self.variables.len();
        &self.values[t * w..(t + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> + '_ {
        (0..self.n).map(move |t| self.row(t))
    }

    /// The case at position `t` as label strings.
    pub fn record(&self, t: usize) -> Vec<&str> {
        self.row(t)
            .iter()
            .zip(&self.variables)
            .map(|(&k, v)| v.labels()[k].as_str())
            .collect()
    }

    /// A copy with the cases reordered: case `t` of the result is case `perm[t]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::validation("permutation length differs from n"));
        }
        let rows = perm.iter().map(|&t| self.row(t).to_vec()).collect();
        Self::new(self.variables.clone(), rows)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.variables.len() {
            return Err(Error::InvalidFamily(format!(
                "variable index {i} out of range ({} variables)",
                self.variables.len()
            )));
        }
        Ok(())
    }

    /// Sufficient statistics `n(x_ik | π_ij)` for one family.
    pub fn count(&self, child: usize, parents: &[usize]) -> Result<ContingencyCounts> {
        self.check_index(child)?;
        for (m, &p) in parents.iter().enumerate() {
            self.check_index(p)?;
            if p == child {
                return Err(Error::InvalidFamily(format!(
                    "child `{}` listed among its own parents",
                    self.variables[child].name()
                )));
            }
            if parents[..m].contains(&p) {
                return Err(Error::InvalidFamily(format!(
                    "parent `{}` listed twice",
                    self.variables[p].name()
                )));
            }
        }
        let parent_cards: Vec<usize> = parents.iter().map(|&p| self.cardinality(p)).collect();
        let configs = parent_cards
            .iter()
            .try_fold(1usize, |acc, &c| acc.checked_mul(c))
            .filter(|&c| c <= MAX_CONFIGURATIONS)
            .ok_or_else(|| Error::Capacity {
                what: format!(
                    "parent configurations for `{}`",
                    self.variables[child].name()
                ),
                cap: MAX_CONFIGURATIONS,
                got: usize::MAX,
            })?;
        let c = self.cardinality(child);
        let mut table = vec![0u64; configs * c];
        let mut config_totals = vec![0u64; configs];
        for row in self.rows() {
            let j = parents
                .iter()
                .zip(&parent_cards)
                .fold(0usize, |acc, (&p, &cp)| acc * cp + row[p]);
            table[j * c + row[child]] += 1;
            config_totals[j] += 1;
        }
        Ok(ContingencyCounts {
            child,
            parents: parents.to_vec(),
            child_cardinality: c,
            parent_cardinalities: parent_cards,
            table,
            config_totals,
        })
    }
}

/// Counts for one (child, parents) family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyCounts {
    pub child: usize,
    pub parents: Vec<usize>,
    pub child_cardinality: usize,
    pub parent_cardinalities: Vec<usize>,
    /// `table[j * child_cardinality + k] = n(x_ik | π_ij)`.
    pub table: Vec<u64>,
    /// `config_totals[j] = n(π_ij)`.
    pub config_totals: Vec<u64>,
}

impl ContingencyCounts {
    pub fn num_configurations(&self) -> usize {
        self.config_totals.len()
    }

    pub fn get(&self, j: usize, k: usize) -> u64 {
        self.table[j * self.child_cardinality + k]
    }

    pub fn config_row(&self, j: usize) -> &[u64] {
        &self.table[j * self.child_cardinality..(j + 1) * self.child_cardinality]
    }

    pub fn total(&self) -> u64 {
        self.config_totals.iter().sum()
    }
}

/// Conditional probability tables for every variable of a network.
///
/// `tables[i][j]` is the distribution of variable `i` given parent
/// configuration `j` of the DAG's parent list for `i` (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkCpts {
    pub variables: Vec<VariableSpec>,
    pub tables: Vec<Vec<Vec<f64>>>,
}

impl NetworkCpts {
    pub fn validate(&self, dag: &DagModel) -> Result<()> {
        if self.variables.len() != dag.num_variables() || self.tables.len() != dag.num_variables() {
            return Err(Error::validation(format!(
                "CPTs describe {} variables, DAG has {}",
                self.tables.len(),
                dag.num_variables()
            )));
        }
        for (i, table) in self.tables.iter().enumerate() {
            let name = self.variables[i].name();
            let configs: usize = dag
                .parents(i)
                .iter()
                .map(|&p| self.variables[p].cardinality())
                .product();
            if table.len() != configs {
                return Err(Error::validation(format!(
                    "CPT for `{name}` has {} rows, expected {configs}",
                    table.len()
                )));
            }
            for (j, row) in table.iter().enumerate() {
                if row.len() != self.variables[i].cardinality() {
                    return Err(Error::validation(format!(
                        "CPT for `{name}` row {j} has {} entries, expected {}",
                        row.len(),
                        self.variables[i].cardinality()
                    )));
                }
                if row.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
                    return Err(Error::validation(format!(
                        "CPT for `{name}` row {j} has a negative or non-finite entry"
                    )));
                }
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(Error::validation(format!(
                        "CPT for `{name}` row {j} sums to {s}, not 1"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Forward (ancestral) sampling of `n` cases; identical seeds give identical data.
pub fn sample_network(
    dag: &DagModel,
    cpts: &NetworkCpts,
    n: usize,
    seed: u64,
) -> Result<CategoricalDataset> {
    cpts.validate(dag)?;
    let order = dag.topological_order()?;
    let cards: Vec<usize> = cpts
        .variables
        .iter()
        .map(VariableSpec::cardinality)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = vec![0usize; cards.len()];
        for &i in &order {
            let j = dag
                .parents(i)
                .iter()
                .fold(0usize, |acc, &p| acc * cards[p] + row[p]);
            let dist = &cpts.tables[i][j];
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut k = dist.len() - 1;
            for (s, &p) in dist.iter().enumerate() {
                acc += p;
                if u < acc {
                    k = s;
                    break;
                }
            }
            // zero-probability tail states are never drawn by the fallback
            while dist[k] == 0.0 && k > 0 {
                k -= 1;
            }
            row[i] = k;
        }
        rows.push(row);
    }
    CategoricalDataset::new(cpts.variables.clone(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_rows() -> CategoricalDataset {
        CategoricalDataset::load_csv("A,B\na1,b1\na1,b2\na2,b1".as_bytes(), CsvOptions::default())
            .unwrap()
    }

    #[test]
    fn parses_small_file() {
        let d = three_rows();
        assert_eq!(d.n(), 3);
        assert_eq!(d.cardinality(0), 2);
        assert_eq!(d.cardinality(1), 2);
        assert_eq!(d.variable(0).labels(), ["a1", "a2"]);
    }

    #[test]
    fn labels_follow_first_appearance() {
        let d = CategoricalDataset::load_csv("V\nz\na\nz\nm".as_bytes(), CsvOptions::default())
            .unwrap();
        assert_eq!(d.variable(0).labels(), ["z", "a", "m"]);
        assert_eq!(d.row(3), [2]);
    }

    #[test]
    fn headerless_names() {
        let d =
            CategoricalDataset::load_csv("a,b\nc,d".as_bytes(), CsvOptions { has_header: false })
                .unwrap();
        assert_eq!(d.variable(0).name(), "X1");
        assert_eq!(d.variable(1).name(), "X2");
        assert_eq!(d.n(), 2);
    }

    #[test]
    fn blank_field_is_incomplete_sample() {
        let err = CategoricalDataset::load_csv(
            "A,B\na1,b1\n,b2\na2,b1".as_bytes(),
            CsvOptions::default(),
        )
        .unwrap_err();
        match err {
            Error::IncompleteSample { line, column } => {
                assert_eq!(line, 3);
                assert_eq!(column, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_row_names_line() {
        let err =
            CategoricalDataset::load_csv("A,B\na1,b1\na2,b2,c\n".as_bytes(), CsvOptions::default())
                .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn single_category_rejected() {
        let err = CategoricalDataset::load_csv("A,B\na,b1\na,b2".as_bytes(), CsvOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::DegenerateVariable { observed: 1, .. }));
    }

    #[test]
    fn count_with_no_parents_is_histogram() {
        let d = three_rows();
        let c = d.count(0, &[]).unwrap();
        assert_eq!(c.table, vec![2, 1]);
        assert_eq!(c.config_totals, vec![3]);
    }

    #[test]
    fn count_hand_checked() {
        let d = three_rows();
        let c = d.count(0, &[1]).unwrap();
        // j = b1, b2 ; k = a1, a2
        assert_eq!(c.get(0, 0), 1);
        assert_eq!(c.get(0, 1), 1);
        assert_eq!(c.get(1, 0), 1);
        assert_eq!(c.get(1, 1), 0);
        assert_eq!(c.config_totals, vec![2, 1]);
    }

    #[test]
    fn count_rejects_child_in_parents() {
        let d = three_rows();
        assert!(matches!(d.count(0, &[1, 0]), Err(Error::InvalidFamily(_))));
        assert!(matches!(d.count(0, &[1, 1]), Err(Error::InvalidFamily(_))));
        assert!(matches!(d.count(5, &[]), Err(Error::InvalidFamily(_))));
    }

    #[test]
    fn parent_configurations_are_row_major() {
        let vars = vec![
            VariableSpec::new("C", vec!["0".into(), "1".into()]).unwrap(),
            VariableSpec::new("P", vec!["0".into(), "1".into(), "2".into()]).unwrap(),
            VariableSpec::new("Q", vec!["0".into(), "1".into()]).unwrap(),
        ];
        let d = CategoricalDataset::new(vars, vec![vec![1, 2, 1]]).unwrap();
        let c = d.count(0, &[1, 2]).unwrap();
        assert_eq!(c.num_configurations(), 6);
        // (P=2, Q=1) -> 2 * 2 + 1 = 5
        assert_eq!(c.config_totals[5], 1);
        assert_eq!(c.get(5, 1), 1);
        let c = d.count(0, &[2, 1]).unwrap();
        // (Q=1, P=2) -> 1 * 3 + 2 = 5
        assert_eq!(c.config_totals[5], 1);
    }

    #[test]
    fn csv_round_trip() {
        let d = three_rows();
        let text = d.to_csv_string();
        assert_eq!(text, "A,B\na1,b1\na1,b2\na2,b1\n");
        let back = CategoricalDataset::load_csv(text.as_bytes(), CsvOptions::default()).unwrap();
        assert_eq!(back, d);
    }
}
