use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::{Column, Dataset, Value};
use crate::error::{Error, Result};
use crate::formula::{Formula, Term};

pub const INTERCEPT_LABEL: &str = "(Intercept)";

/// How each predictor variable is encoded: continuous variables enter as
/// themselves, discrete variables as treatment-coded indicators against
/// their first level.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Encoding {
    /// Variable → ordered levels (`None` for continuous variables).
    pub variables: BTreeMap<String, Option<Vec<Value>>>,
}

impl Encoding {
    /// Learns level sets from the given rows of `d` for every variable used
    /// by `formulas`.
    pub fn learn(d: &Dataset, formulas: &[&Formula], rows: &[usize]) -> Result<Encoding> {
        let mut variables = BTreeMap::new();
        for f in formulas {
            for v in f.variables() {
                if variables.contains_key(v) {
                    continue;
                }
                let col = d.column(v)?;
                let levels = if col.ty.is_discrete() {
                    let levels = present_levels(col, rows);
                    if levels.len() < 2 {
                        return Err(Error::NoContrast(v.to_string()));
                    }
                    Some(levels)
                } else {
                    None
                };
                variables.insert(v.to_string(), levels);
            }
        }
        Ok(Encoding { variables })
    }

    pub fn reference_levels(&self) -> BTreeMap<String, Value> {
        self.variables
            .iter()
            .filter_map(|(k, v)| v.as_ref().map(|l| (k.clone(), l[0].clone())))
            .collect()
    }

    /// Main-effect columns for one variable: (labels, column-major values).
    fn variable_columns(
        &self,
        d: &Dataset,
        name: &str,
        rows: &[usize],
    ) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
        let col = d.column(name)?;
        let levels = self
            .variables
            .get(name)
            .ok_or_else(|| Error::Internal(format!("no encoding for `{name}`")))?;
        match levels {
            None => {
                let values = col
                    .numeric()
                    .ok_or_else(|| Error::Mismatch(format!("`{name}` is not numeric")))?;
                let v = rows
                    .iter()
                    .map(|&r| {
                        values[r].ok_or_else(|| {
                            Error::Mismatch(format!("missing value in `{name}` at row {r}"))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok((vec![name.to_string()], vec![v]))
            }
            Some(levels) => {
                let mut labels = Vec::with_capacity(levels.len() - 1);
                let mut columns = vec![vec![0.0; rows.len()]; levels.len() - 1];
                for level in &levels[1..] {
                    labels.push(format!("{name}{level}"));
                }
                for (i, &r) in rows.iter().enumerate() {
                    let value = col.data.get(r).ok_or_else(|| {
                        Error::Mismatch(format!("missing value in `{name}` at row {r}"))
                    })?;
                    let k = levels.iter().position(|l| *l == value).ok_or_else(|| {
                        Error::Mismatch(format!(
                            "level `{value}` of `{name}` was not present when the model was fit"
                        ))
                    })?;
                    if k > 0 {
                        columns[k - 1][i] = 1.0;
                    }
                }
                Ok((labels, columns))
            }
        }
    }

    /// Builds the design matrix of `f` over `rows` of `d`.
    pub fn design(&self, d: &Dataset, f: &Formula, rows: &[usize]) -> Result<DesignMatrix> {
        let n = rows.len();
        let mut labels: Vec<String> = Vec::new();
        let mut columns: Vec<Vec<f64>> = Vec::new();
        let mut term_columns = Vec::new();
        if f.intercept {
            labels.push(INTERCEPT_LABEL.to_string());
            columns.push(vec![1.0; n]);
        }
        let mut cache: BTreeMap<&str, (Vec<String>, Vec<Vec<f64>>)> = BTreeMap::new();
        for term in &f.terms {
            // Elementwise products of every combination of the main-effect columns.
            let mut acc: Vec<(String, Vec<f64>)> = vec![(String::new(), vec![1.0; n])];
            for v in &term.variables {
                if !cache.contains_key(v.as_str()) {
                    cache.insert(v.as_str(), self.variable_columns(d, v, rows)?);
                }
                let (vl, vc) = &cache[v.as_str()];
                let mut next = Vec::with_capacity(acc.len() * vl.len());
                for (label, values) in &acc {
                    for (l, c) in vl.iter().zip(vc) {
                        let name = if label.is_empty() {
                            l.clone()
                        } else {
                            format!("{label}:{l}")
                        };
                        next.push((name, values.iter().zip(c).map(|(a, b)| a * b).collect()));
                    }
                }
                acc = next;
            }
            let start = columns.len();
            for (label, values) in acc {
                labels.push(label);
                columns.push(values);
            }
            term_columns.push((term.clone(), (start..columns.len()).collect()));
        }
        let matrix = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
        Ok(DesignMatrix {
            labels,
            matrix,
            term_columns,
            reference_levels: self.reference_levels(),
            intercept: f.intercept,
        })
    }
}

fn present_levels(col: &Column, rows: &[usize]) -> Vec<Value> {
    let levels = col.ty.levels();
    let mut present = vec![false; levels.len()];
    for &r in rows {
        if let Some(k) = col.level_index(r) {
            present[k] = true;
        }
    }
    levels
        .iter()
        .zip(present)
        .filter_map(|(l, p)| p.then(|| l.clone()))
        .collect()
}

/// Numeric model matrix with column labels and the term → columns map.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub labels: Vec<String>,
    pub matrix: DMatrix<f64>,
    pub term_columns: Vec<(Term, Vec<usize>)>,
    pub reference_levels: BTreeMap<String, Value>,
    pub intercept: bool,
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn column(&self, label: &str) -> Option<Vec<f64>> {
        let j = self.labels.iter().position(|l| l == label)?;
        Some(self.matrix.column(j).iter().copied().collect())
    }
}

/// Design matrix of `f` over every row of `d`; fails on missing values.
pub fn build_design_matrix(d: &Dataset, f: &Formula) -> Result<DesignMatrix> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let rows: Vec<usize> = (0..d.n_rows()).collect();
    let vars = f.variables();
    let complete = d.complete_rows(&vars)?;
    if complete.len() != rows.len() {
        return Err(Error::Mismatch(format!(
            "{} rows have missing predictor values",
            rows.len() - complete.len()
        )));
    }
    let encoding = Encoding::learn(d, &[f], &rows)?;
    encoding.design(d, f, &rows)
}
