//! Typed columnar tables with an ordered filter/transform history.
//!
//! A [`Dataset`] is an immutable value: every operation returns a new table
//! and appends to its `pipeline`. Charts and models both read from the same
//! post-pipeline table, so a filter applied here is seen by every check.

mod csv;
mod value;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::csv::{load_csv, load_csv_with, LoadOptions, DEFAULT_DISCRETE_THRESHOLD};
pub use self::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Discrete,
}

/// Kind of a column plus, for discrete columns, its ordered level set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnType {
    Continuous,
    Discrete { levels: Vec<Value> },
}

impl ColumnType {
    pub fn kind(&self) -> ColumnKind {
        match self {
            ColumnType::Continuous => ColumnKind::Continuous,
            ColumnType::Discrete { .. } => ColumnKind::Discrete,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, ColumnType::Discrete { .. })
    }

    pub fn levels(&self) -> &[Value] {
        match self {
            ColumnType::Continuous => &[],
            ColumnType::Discrete { levels } => levels,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<Option<f64>>),
    Text(Vec<Option<String>>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, ColumnData::Numeric(_))
    }

    pub fn get(&self, row: usize) -> Option<Value> {
        match self {
            ColumnData::Numeric(v) => v[row].map(Value::Number),
            ColumnData::Text(v) => v[row].clone().map(Value::Text),
        }
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            ColumnData::Numeric(v) => v[row].is_none(),
            ColumnData::Text(v) => v[row].is_none(),
        }
    }

    fn take(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Text(v) => {
                ColumnData::Text(rows.iter().map(|&r| v[r].clone()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub ty: ColumnType,
    pub data: ColumnData,
}

impl Column {
    /// Builds a column, inferring continuous/discrete from the distinct count.
    pub fn infer(name: impl Into<String>, data: ColumnData, discrete_threshold: usize) -> Column {
        let ty = match &data {
            ColumnData::Numeric(values) => {
                let levels = numeric_levels(values);
                if levels.len() <= discrete_threshold && !levels.is_empty() {
                    ColumnType::Discrete { levels }
                } else {
                    ColumnType::Continuous
                }
            }
            ColumnData::Text(values) => ColumnType::Discrete {
                levels: text_levels(values),
            },
        };
        Column {
            name: name.into(),
            ty,
            data,
        }
    }

    /// Recomputes discrete levels from the values currently present.
    fn relevel(mut self) -> Column {
        if let ColumnType::Discrete { levels } = &mut self.ty {
            *levels = match &self.data {
                ColumnData::Numeric(v) => numeric_levels(v),
                ColumnData::Text(v) => text_levels(v),
            };
        }
        self
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn numeric(&self) -> Option<&[Option<f64>]> {
        match &self.data {
            ColumnData::Numeric(v) => Some(v),
            ColumnData::Text(_) => None,
        }
    }

    /// Zero-based position of a value in the level set, if discrete.
    pub fn level_index(&self, row: usize) -> Option<usize> {
        let value = self.data.get(row)?;
        self.ty.levels().iter().position(|l| *l == value)
    }
}

fn numeric_levels(values: &[Option<f64>]) -> Vec<Value> {
    let mut seen: Vec<f64> = values.iter().flatten().copied().collect();
    seen.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    seen.dedup();
    seen.into_iter().map(Value::Number).collect()
}

fn text_levels(values: &[Option<String>]) -> Vec<Value> {
    let set: BTreeSet<&String> = values.iter().flatten().collect();
    set.into_iter().cloned().map(Value::Text).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CompareOp {
    pub fn is_ordering(self) -> bool {
        matches!(self, CompareOp::Lt | CompareOp::Le | CompareOp::Gt | CompareOp::Ge)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
            CompareOp::Eq => "==",
            CompareOp::Ne => "!=",
        }
    }

    fn holds(self, ord: Ordering) -> bool {
        match self {
            CompareOp::Lt => ord == Ordering::Less,
            CompareOp::Le => ord != Ordering::Greater,
            CompareOp::Gt => ord == Ordering::Greater,
            CompareOp::Ge => ord != Ordering::Less,
            CompareOp::Eq => ord == Ordering::Equal,
            CompareOp::Ne => ord != Ordering::Equal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    #[default]
    Include,
    Exclude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Filter {
    pub column: String,
    pub op: CompareOp,
    #[serde(default)]
    pub mode: FilterMode,
    pub criterion: Value,
}

impl Filter {
    pub fn include(column: impl Into<String>, op: CompareOp, criterion: impl Into<Value>) -> Self {
        Filter {
            column: column.into(),
            op,
            mode: FilterMode::Include,
            criterion: criterion.into(),
        }
    }

    pub fn exclude(column: impl Into<String>, op: CompareOp, criterion: impl Into<Value>) -> Self {
        Filter {
            mode: FilterMode::Exclude,
            ..Filter::include(column, op, criterion)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Log,
    Logit,
}

impl TransformKind {
    fn name(self) -> &'static str {
        match self {
            TransformKind::Log => "log",
            TransformKind::Logit => "logit",
        }
    }

    fn in_domain(self, x: f64) -> bool {
        match self {
            TransformKind::Log => x > 0.0 && x.is_finite(),
            TransformKind::Logit => x > 0.0 && x < 1.0,
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            TransformKind::Log => x.ln(),
            TransformKind::Logit => (x / (1.0 - x)).ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub column: String,
    pub kind: TransformKind,
}

impl Transform {
    pub fn log(column: impl Into<String>) -> Self {
        Transform {
            column: column.into(),
            kind: TransformKind::Log,
        }
    }

    pub fn logit(column: impl Into<String>) -> Self {
        Transform {
            column: column.into(),
            kind: TransformKind::Logit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum PipelineStep {
    Filter(Filter),
    Transform(Transform),
}

impl fmt::Display for PipelineStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineStep::Filter(flt) => {
                let mode = match flt.mode {
                    FilterMode::Include => "keep",
                    FilterMode::Exclude => "drop",
                };
                write!(f, "{mode} {} {} {}", flt.column, flt.op.symbol(), flt.criterion)
            }
            PipelineStep::Transform(t) => write!(f, "{}({})", t.kind.name(), t.column),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    columns: Vec<Column>,
    n_rows: usize,
    pipeline: Vec<PipelineStep>,
}

impl Dataset {
    /// Assembles a dataset from pre-built columns.
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Result<Dataset> {
        let n_rows = columns.first().map_or(0, Column::len);
        let mut names = BTreeSet::new();
        for c in &columns {
            if !names.insert(c.name.as_str()) {
                return Err(Error::DuplicateColumn(c.name.clone()));
            }
            if c.len() != n_rows {
                return Err(Error::Mismatch(format!(
                    "column `{}` has {} rows, expected {}",
                    c.name,
                    c.len(),
                    n_rows
                )));
            }
        }
        Ok(Dataset {
            name: name.into(),
            columns,
            n_rows,
            pipeline: Vec::new(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn pipeline(&self) -> &[PipelineStep] {
        &self.pipeline
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c.name == name)
    }

    pub fn column_type(&self, name: &str) -> Result<&ColumnType> {
        self.column(name).map(|c| &c.ty)
    }

    pub fn value(&self, column: &str, row: usize) -> Result<Option<Value>> {
        Ok(self.column(column)?.data.get(row))
    }

    /// Indices of rows with no missing value in any of `names`.
    pub fn complete_rows<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        let cols = names
            .iter()
            .map(|n| self.column(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..self.n_rows)
            .filter(|&r| cols.iter().all(|c| !c.data.is_missing(r)))
            .collect())
    }

    /// Returns a dataset restricted to `rows`, in the given order. Discrete
    /// level sets are recomputed; pipeline history is kept.
    pub fn take_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| {
                    Column {
                        name: c.name.clone(),
                        ty: c.ty.clone(),
                        data: c.data.take(rows),
                    }
                    .relevel()
                })
                .collect(),
            n_rows: rows.len(),
            pipeline: self.pipeline.clone(),
        }
    }

    fn filter_mask(&self, f: &Filter) -> Result<Vec<bool>> {
        let col = self.column(&f.column)?;
        let invalid = |message: String| Error::InvalidFilter {
            column: f.column.clone(),
            message,
        };
        let predicate: Vec<bool> = match &col.data {
            ColumnData::Numeric(values) => {
                let criterion = f.criterion.as_number().ok_or_else(|| {
                    invalid(format!(
                        "criterion {} is not numeric but the column is",
                        f.criterion
                    ))
                })?;
                values
                    .iter()
                    .map(|v| match v.and_then(|x| x.partial_cmp(&criterion)) {
                        Some(ord) => f.op.holds(ord),
                        None => false,
                    })
                    .collect()
            }
            ColumnData::Text(values) => {
                if f.op.is_ordering() {
                    return Err(invalid(format!(
                        "ordering comparison {:?} on unordered discrete column",
                        f.op
                    )));
                }
                let criterion = f.criterion.to_string();
                values
                    .iter()
                    .map(|v| match v {
                        Some(s) => f.op.holds(s.as_str().cmp(criterion.as_str())),
                        None => false,
                    })
                    .collect()
            }
        };
        Ok(match f.mode {
            FilterMode::Include => predicate,
            FilterMode::Exclude => {
                // Missing cells satisfy neither side, so include/exclude partition the
                // non-missing rows and drop missing ones in both modes.
                predicate
                    .iter()
                    .enumerate()
                    .map(|(r, &p)| !p && !col.data.is_missing(r))
                    .collect()
            }
        })
    }

    /// Keeps exactly the rows for which the filter holds.
    pub fn apply_filter(&self, f: &Filter) -> Result<Dataset> {
        let mask = self.filter_mask(f)?;
        let rows: Vec<usize> = mask
            .iter()
            .enumerate()
            .filter_map(|(r, &keep)| keep.then_some(r))
            .collect();
        let mut out = self.take_rows(&rows);
        out.pipeline.push(PipelineStep::Filter(f.clone()));
        Ok(out)
    }

    /// Replaces a numeric column in place by its log or logit.
    pub fn apply_transform(&self, t: &Transform) -> Result<Dataset> {
        let idx = self
            .columns
            .iter()
            .position(|c| c.name == t.column)
            .ok_or_else(|| Error::UnknownVariable(t.column.clone()))?;
        let col = &self.columns[idx];
        let values = col.numeric().ok_or_else(|| Error::TransformDomain {
            column: t.column.clone(),
            transform: t.kind.name(),
            rows: (0..self.n_rows).filter(|&r| !col.data.is_missing(r)).collect(),
        })?;
        let offending: Vec<usize> = values
            .iter()
            .enumerate()
            .filter_map(|(r, v)| match v {
                Some(x) if !t.kind.in_domain(*x) => Some(r),
                _ => None,
            })
            .collect();
        if !offending.is_empty() {
            return Err(Error::TransformDomain {
                column: t.column.clone(),
                transform: t.kind.name(),
                rows: offending,
            });
        }
        let data = ColumnData::Numeric(values.iter().map(|v| v.map(|x| t.kind.apply(x))).collect());
        let mut out = self.clone();
        out.columns[idx] = Column {
            name: col.name.clone(),
            ty: col.ty.clone(),
            data,
        }
        .relevel();
        out.pipeline.push(PipelineStep::Transform(t.clone()));
        Ok(out)
    }

    /// Applies every filter in order, then every transform in order.
    pub fn apply_pipeline(&self, filters: &[Filter], transforms: &[Transform]) -> Result<Dataset> {
        let mut current = self.clone();
        for (step, f) in filters.iter().enumerate() {
            current = current.apply_filter(f).map_err(|e| Error::Pipeline {
                step,
                source: Box::new(e),
            })?;
        }
        for (i, t) in transforms.iter().enumerate() {
            current = current.apply_transform(t).map_err(|e| Error::Pipeline {
                step: filters.len() + i,
                source: Box::new(e),
            })?;
        }
        Ok(current)
    }

    /// Applies steps given in user-entry order; filters still run before transforms.
    pub fn apply_steps(&self, steps: &[PipelineStep]) -> Result<Dataset> {
        let mut filters = Vec::new();
        let mut transforms = Vec::new();
        for s in steps {
            match s {
                PipelineStep::Filter(f) => filters.push(f.clone()),
                PipelineStep::Transform(t) => transforms.push(t.clone()),
            }
        }
        self.apply_pipeline(&filters, &transforms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numbers(name: &str, xs: &[f64]) -> Column {
        Column::infer(
            name,
            ColumnData::Numeric(xs.iter().copied().map(Some).collect()),
            DEFAULT_DISCRETE_THRESHOLD,
        )
    }

    fn texts(name: &str, xs: &[&str]) -> Column {
        Column::infer(
            name,
            ColumnData::Text(xs.iter().map(|s| Some(s.to_string())).collect()),
            DEFAULT_DISCRETE_THRESHOLD,
        )
    }

    fn absences() -> Dataset {
        Dataset::new(
            "abs",
            vec![
                numbers("absences", &[0.0, 3.0, 0.0, 7.0]),
                texts("g_edu", &["none", "higher", "none", "primary"]),
            ],
        )
        .unwrap()
    }

    fn numeric_values(d: &Dataset, name: &str) -> Vec<f64> {
        d.column(name).unwrap().numeric().unwrap().iter().map(|v| v.unwrap()).collect()
    }

    #[test]
    fn include_gt_zero() {
        let d = absences().apply_filter(&Filter::include("absences", CompareOp::Gt, 0.0)).unwrap();
        assert_eq!(numeric_values(&d, "absences"), vec![3.0, 7.0]);
        assert_eq!(d.pipeline().len(), 1);
    }

    #[test]
    fn exclude_text_eq() {
        let d = absences().apply_filter(&Filter::exclude("g_edu", CompareOp::Eq, "none")).unwrap();
        assert_eq!(d.n_rows(), 2);
        let levels = d.column_type("g_edu").unwrap().levels().to_vec();
        assert_eq!(levels, vec![Value::from("higher"), Value::from("primary")]);
    }

    #[test]
    fn filter_to_empty_is_legal() {
        let d = absences().apply_filter(&Filter::include("absences", CompareOp::Gt, 100.0)).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn ordering_on_text_rejected() {
        let err = absences()
            .apply_filter(&Filter::include("g_edu", CompareOp::Lt, "none"))
            .unwrap_err();
        assert!(matches!(err, Error::InvalidFilter { .. }));
    }

    #[test]
    fn unknown_filter_column() {
        let err = absences()
            .apply_filter(&Filter::include("ghost", CompareOp::Eq, 1.0))
            .unwrap_err();
        assert_eq!(err, Error::UnknownVariable("ghost".into()));
    }

    #[test]
    fn ordering_on_numeric_discrete_allowed() {
        let d = Dataset::new("cars", vec![numbers("cyl", &[4.0, 6.0, 8.0, 4.0])]).unwrap();
        assert!(d.column_type("cyl").unwrap().is_discrete());
        let out = d.apply_filter(&Filter::include("cyl", CompareOp::Ge, 6.0)).unwrap();
        assert_eq!(out.n_rows(), 2);
    }

    #[test]
    fn transforms() {
        let d = Dataset::new("t", vec![numbers("x", &[1.0, std::f64::consts::E])]).unwrap();
        let out = d.apply_transform(&Transform::log("x")).unwrap();
        let v = numeric_values(&out, "x");
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 1.0).abs() < 1e-15);

        let p = Dataset::new("p", vec![numbers("p", &[0.5, 0.25])]).unwrap();
        let out = p.apply_transform(&Transform::logit("p")).unwrap();
        assert_eq!(numeric_values(&out, "p")[0], 0.0);
    }

    #[test]
    fn log_of_zero_lists_rows() {
        let d = Dataset::new("t", vec![numbers("x", &[1.0, 0.0, 2.0, -1.0])]).unwrap();
        let err = d.apply_transform(&Transform::log("x")).unwrap_err();
        match err {
            Error::TransformDomain { rows, .. } => assert_eq!(rows, vec![1, 3]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pipeline_filters_first() {
        let d = Dataset::new("t", vec![numbers("x", &[-1.0, 1.0, std::f64::consts::E])]).unwrap();
        let f = Filter::include("x", CompareOp::Gt, 0.0);
        let t = Transform::log("x");
        let out = d.apply_pipeline(&[f.clone()], &[t.clone()]).unwrap();
        let v = numeric_values(&out, "x");
        assert_eq!(v.len(), 2);
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 1.0).abs() < 1e-15);
        let reversed = d
            .apply_steps(&[PipelineStep::Transform(t), PipelineStep::Filter(f)])
            .unwrap();
        assert_eq!(reversed, out);
    }

    #[test]
    fn pipeline_error_carries_step() {
        let d = Dataset::new("t", vec![numbers("x", &[0.0, 1.0])]).unwrap();
        let err = d
            .apply_pipeline(&[Filter::include("x", CompareOp::Ge, 0.0)], &[Transform::log("x")])
            .unwrap_err();
        assert!(matches!(err, Error::Pipeline { step: 1, .. }));
    }

    #[test]
    fn empty_pipeline_is_identity() {
        let d = absences();
        assert_eq!(d.apply_pipeline(&[], &[]).unwrap(), d);
    }
}
