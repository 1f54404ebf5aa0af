//! Parameter draws, hypothetical outcome datasets, residuals, and the merged
//! observed-plus-predicted table behind every model check.

use std::collections::BTreeSet;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Serialize, Serializer};

use crate::dataset::{ColumnData, Dataset, PipelineStep, Value};
use crate::error::{Error, Result};
use crate::family::FamilyParams;
use crate::fit::{outcome_values, FittedModel, Predictors};
use crate::numeric::{fnv1a, mix_seed};

pub const DEFAULT_DRAWS: usize = 50;
pub const MAX_DRAWS: usize = 500;

/// Prefix of the per-model residual columns in a [`PredictiveTable`].
pub const RESIDUAL_PREFIX: &str = "residual:";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamDraw {
    pub draw_index: usize,
    pub beta: Vec<f64>,
}

/// Symmetric square root factor `L` with `L Lᵀ = cov`, negative eigenvalues clamped to 0.
fn spectral_root(cov: DMatrix<f64>) -> DMatrix<f64> {
    let eig = cov.symmetric_eigen();
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&root)
}

/// `n_draws` coefficient vectors from MVN(beta, covariance).
pub fn draw_parameters(m: &FittedModel, n_draws: usize, seed: u64) -> Result<Vec<ParamDraw>> {
    if !m.converged {
        return Err(Error::NotConverged);
    }
    sample_parameters(m, n_draws, seed)
}

fn sample_parameters(m: &FittedModel, n_draws: usize, seed: u64) -> Result<Vec<ParamDraw>> {
    if n_draws == 0 {
        return Err(Error::InvalidParameter("n_draws must be at least 1".into()));
    }
    let p = m.beta.len();
    let mut cov = m.covariance_matrix();
    if cov.iter().any(|v| !v.is_finite()) {
        cov = DMatrix::zeros(p, p);
    }
    let root = spectral_root(cov);
    let mean = DVector::from_column_slice(&m.beta);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_draws)
        .map(|draw_index| {
            let z = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
            let beta = &mean + &root * z;
            ParamDraw {
                draw_index,
                beta: beta.iter().copied().collect(),
            }
        })
        .collect())
}

/// Outcome draws for one parameter draw at the model's observed design points.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedBlock {
    pub draw_index: usize,
    /// Dataset rows, one per predicted outcome.
    pub rows: Vec<usize>,
    /// Outcomes on the data scale.
    pub outcome: Vec<f64>,
}

/// Rows of `d` the model applies to: complete cases over all its variables.
fn model_rows(m: &FittedModel, d: &Dataset) -> Result<Vec<usize>> {
    d.complete_rows(&m.spec.variables())
}

/// Samples `y*_i` for every complete row of `d` under `draw`.
///
/// Predictor columns are not copied: the block indexes rows of `d`, so every
/// column (including ones the model ignores) stays available for faceting.
pub fn predictive_dataset(
    m: &FittedModel,
    d: &Dataset,
    draw: &ParamDraw,
    seed: u64,
) -> Result<PredictedBlock> {
    if draw.beta.len() != m.beta.len() {
        return Err(Error::Mismatch(format!(
            "draw has {} coefficients, model has {}",
            draw.beta.len(),
            m.beta.len()
        )));
    }
    let rows = model_rows(m, d)?;
    let predictors = Predictors::build(&m.spec, &m.encoding, d, &rows)?;
    let (eta, log_sigma) = predictors.eta(&draw.beta);
    let family = m.spec.family;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed.wrapping_add(draw.draw_index as u64)));
    let outcome = (0..rows.len())
        .map(|i| family.sample_unchecked(eta[i], log_sigma[i].exp(), &mut rng))
        .collect();
    Ok(PredictedBlock {
        draw_index: draw.draw_index,
        rows,
        outcome,
    })
}

/// Response-scale residuals `y_i - E[y_i]` at the MLE.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualColumn {
    pub rows: Vec<usize>,
    pub residuals: Vec<f64>,
}

pub fn residuals(m: &FittedModel, d: &Dataset) -> Result<ResidualColumn> {
    if !m.converged {
        return Err(Error::NotConverged);
    }
    residuals_unchecked(m, d)
}

fn fitted_means(m: &FittedModel, d: &Dataset, rows: &[usize]) -> Result<Vec<f64>> {
    let predictors = Predictors::build(&m.spec, &m.encoding, d, rows)?;
    let (eta, log_sigma) = predictors.eta(&m.beta);
    let family = m.spec.family;
    Ok((0..rows.len())
        .map(|i| {
            let sigma = family.has_scale().then(|| log_sigma[i].exp());
            family.mean(FamilyParams::new(eta[i], sigma))
        })
        .collect())
}

fn residuals_unchecked(m: &FittedModel, d: &Dataset) -> Result<ResidualColumn> {
    let rows = model_rows(m, d)?;
    let means = fitted_means(m, d, &rows)?;
    let y = outcome_values(d, &m.spec)?;
    let residuals = rows
        .iter()
        .zip(&means)
        .map(|(&r, mean)| y[r].expect("complete row") - mean)
        .collect();
    Ok(ResidualColumn { rows, residuals })
}

/// Where a predictive-table record comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    Observed,
    /// Index into [`PredictiveTable::models`].
    Model(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub source: Source,
    pub draw: Option<usize>,
    pub row: usize,
    /// Predicted outcome (model records only).
    pub predicted: Option<Value>,
    /// `y* - E[y]` for model records.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelBlock {
    pub label: String,
    pub response: String,
    pub converged: bool,
    pub diagnostic: Option<String>,
    pub n_obs: usize,
    pub n_draws: usize,
}

/// Observed rows plus `n_draws` predicted copies per model, keyed by
/// `(source, draw, row)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveTable {
    data: Dataset,
    models: Vec<ModelBlock>,
    records: Vec<Record>,
    /// Per model, residual of each dataset row (`None` outside the model's rows).
    observed_residuals: Vec<Vec<Option<f64>>>,
}

impl PredictiveTable {
    /// Observed rows only; identical to assembling a check with no models.
    pub fn observed(d: &Dataset) -> PredictiveTable {
        PredictiveTable {
            data: d.clone(),
            models: Vec::new(),
            records: observed_records(d),
            observed_residuals: Vec::new(),
        }
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn models(&self) -> &[ModelBlock] {
        &self.models
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn pipeline(&self) -> &[PipelineStep] {
        self.data.pipeline()
    }

    pub fn source_label(&self, source: Source) -> &str {
        match source {
            Source::Observed => "observed",
            Source::Model(k) => &self.models[k].label,
        }
    }

    pub fn residual_column(&self, model: usize) -> String {
        format!("{RESIDUAL_PREFIX}{}", self.models[model].label)
    }

    /// Dataset columns (non-outcomes first, then model outcomes) followed by residual columns.
    pub fn columns(&self) -> Vec<String> {
        let outcomes: BTreeSet<&str> = self.models.iter().map(|m| m.response.as_str()).collect();
        let names = self.data.columns().iter().map(|c| c.name.as_str());
        let mut out: Vec<String> = names
            .clone()
            .filter(|n| !outcomes.contains(n))
            .map(str::to_string)
            .collect();
        let mut seen = BTreeSet::new();
        for m in &self.models {
            if seen.insert(m.response.as_str()) {
                out.push(m.response.clone());
            }
        }
        out.extend((0..self.models.len()).map(|k| self.residual_column(k)));
        out
    }

    /// Value of `column` in record `i`; predicted outcomes replace the
    /// model's response, every other column comes from the dataset row.
    pub fn value(&self, i: usize, column: &str) -> Option<Value> {
        let rec = &self.records[i];
        if let Some(label) = column.strip_prefix(RESIDUAL_PREFIX) {
            let k = self.models.iter().position(|m| m.label == label)?;
            return match rec.source {
                Source::Observed => self.observed_residuals[k][rec.row].map(Value::Number),
                Source::Model(j) if j == k => rec.residual.map(Value::Number),
                Source::Model(_) => None,
            };
        }
        if let Source::Model(k) = rec.source {
            if self.models[k].response == column {
                return rec.predicted.clone();
            }
        }
        self.data.value(column, rec.row).ok().flatten()
    }

    /// CSV with columns `source, draw, row`, then [`Self::columns`].
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let io = |e: csv::Error| Error::Internal(e.to_string());
        let mut out = csv::Writer::from_writer(w);
        let columns = self.columns();
        let mut header = vec!["source".to_string(), "draw".into(), "row".into()];
        header.extend(columns.iter().cloned());
        out.write_record(&header).map_err(io)?;
        for (i, rec) in self.records.iter().enumerate() {
            let mut line = vec![
                self.source_label(rec.source).to_string(),
                rec.draw.map(|d| d.to_string()).unwrap_or_default(),
                rec.row.to_string(),
            ];
            line.extend(columns.iter().map(|c| match self.value(i, c) {
                Some(Value::Number(x)) if !x.is_finite() => "NA".to_string(),
                Some(v) => v.to_string(),
                None => "NA".to_string(),
            }));
            out.write_record(&line).map_err(io)?;
        }
        out.flush().map_err(|e| Error::Internal(e.to_string()))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Internal(e.to_string()))
    }
}

fn json_value(v: Option<Value>) -> serde_json::Value {
    match v {
        Some(Value::Number(x)) => serde_json::Number::from_f64(x)
            .map(serde_json::Value::Number)
            .unwrap_or(serde_json::Value::Null),
        Some(Value::Text(s)) => serde_json::Value::String(s),
        None => serde_json::Value::Null,
    }
}

struct RecordView<'a> {
    table: &'a PredictiveTable,
    columns: &'a [String],
    index: usize,
}

impl Serialize for RecordView<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rec = &self.table.records[self.index];
        let mut map = s.serialize_map(Some(3 + self.columns.len()))?;
        map.serialize_entry("source", self.table.source_label(rec.source))?;
        map.serialize_entry("draw", &rec.draw)?;
        map.serialize_entry("row", &rec.row)?;
        for c in self.columns {
            map.serialize_entry(c, &json_value(self.table.value(self.index, c)))?;
        }
        map.end()
    }
}

struct Records<'a>(&'a PredictiveTable, &'a [String]);

impl Serialize for Records<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq((0..self.0.records.len()).map(|index| RecordView {
            table: self.0,
            columns: self.1,
            index,
        }))
    }
}

/// Long format: `{dataset, models, columns, records: [{source, draw, row, ...}]}`.
impl Serialize for PredictiveTable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let columns = self.columns();
        let mut st = s.serialize_struct("PredictiveTable", 4)?;
        st.serialize_field("dataset", self.data.name())?;
        st.serialize_field("models", &self.models)?;
        st.serialize_field("columns", &columns)?;
        st.serialize_field("records", &Records(self, &columns))?;
        st.end()
    }
}

fn observed_records(d: &Dataset) -> Vec<Record> {
    (0..d.n_rows())
        .map(|row| Record {
            source: Source::Observed,
            draw: None,
            row,
            predicted: None,
            residual: None,
        })
        .collect()
}

/// Seed of a model's draws; depends only on the base seed and the label so
/// adding or removing other models never changes them.
pub fn model_seed(seed: u64, label: &str) -> u64 {
    seed.wrapping_add(fnv1a(label.as_bytes()))
}

/// Predicted outcome value on the response column's own scale: binary text
/// outcomes map 0/1 back to their first/second level.
fn outcome_value(d: &Dataset, response: &str, y: f64) -> Value {
    match d.column(response) {
        Ok(col) if matches!(col.data, ColumnData::Text(_)) && col.ty.levels().len() == 2 => {
            col.ty.levels()[usize::from(y >= 0.5)].clone()
        }
        _ => Value::Number(y),
    }
}

/// Merges the observed rows of `d` with `n_draws` predicted blocks per model.
///
/// Non-converged models still contribute blocks, sampled at their final
/// coefficients without parameter uncertainty, so the check renders and shows
/// the failure.
pub fn assemble_check(
    d: &Dataset,
    models: &[FittedModel],
    n_draws: usize,
    seed: u64,
) -> Result<PredictiveTable> {
    if !(1..=MAX_DRAWS).contains(&n_draws) {
        return Err(Error::InvalidParameter(format!(
            "n_draws must be in 1..={MAX_DRAWS}, got {n_draws}"
        )));
    }
    let mut labels = BTreeSet::new();
    for m in models {
        if !labels.insert(m.label()) {
            return Err(Error::DuplicateLabel(m.label().to_string()));
        }
    }

    let mut records = observed_records(d);
    let mut blocks = Vec::with_capacity(models.len());
    let mut observed_residuals = Vec::with_capacity(models.len());

    for (k, m) in models.iter().enumerate() {
        let rows = model_rows(m, d)?;
        if rows != m.rows {
            return Err(Error::Mismatch(format!(
                "model `{}` was fit on a different dataset state",
                m.label()
            )));
        }
        let s = model_seed(seed, m.label());
        let draws = if m.converged {
            draw_parameters(m, n_draws, s)?
        } else {
            (0..n_draws)
                .map(|draw_index| ParamDraw {
                    draw_index,
                    beta: m.beta.clone(),
                })
                .collect()
        };
        let means = fitted_means(m, d, &rows)?;
        let res = residuals_unchecked(m, d)?;
        let mut per_row = vec![None; d.n_rows()];
        for (&r, &e) in res.rows.iter().zip(&res.residuals) {
            per_row[r] = Some(e);
        }
        observed_residuals.push(per_row);

        let response = m.spec.response().to_string();
        for draw in &draws {
            let block = predictive_dataset(m, d, draw, s)?;
            for ((&row, &y), mean) in block.rows.iter().zip(&block.outcome).zip(&means) {
                records.push(Record {
                    source: Source::Model(k),
                    draw: Some(draw.draw_index),
                    row,
                    predicted: Some(outcome_value(d, &response, y)),
                    residual: Some(y - mean),
                });
            }
        }
        blocks.push(ModelBlock {
            label: m.label().to_string(),
            response,
            converged: m.converged,
            diagnostic: m.diagnostic.clone(),
            n_obs: rows.len(),
            n_draws,
        });
    }

    Ok(PredictiveTable {
        data: d.clone(),
        models: blocks,
        records,
        observed_residuals,
    })
}
