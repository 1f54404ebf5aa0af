//! Chart requests, smart defaults, trellis facets, and the check
//! layout: the user's chart repeated once per model with shared scales.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnKind, Dataset, Value};
use crate::error::{Error, Result};
use crate::predict::{PredictiveTable, Source};

/// Fraction of the data range added on each side of a quantitative domain.
pub const SCALE_PADDING: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    Bar,
    Strip,
    Scatter,
    Heatmap,
}

/// Chart kind implied by the types on the x and y shelves; `None` when both are empty.
pub fn default_chart(x: Option<ColumnKind>, y: Option<ColumnKind>) -> Option<ChartKind> {
    use ColumnKind::{Continuous, Discrete};
    match (x, y) {
        (None, None) => None,
        (Some(Discrete), None) | (None, Some(Discrete)) => Some(ChartKind::Bar),
        (Some(Continuous), None) | (None, Some(Continuous)) => Some(ChartKind::Strip),
        (Some(Continuous), Some(Continuous)) => Some(ChartKind::Scatter),
        (Some(Discrete), Some(Discrete)) => Some(ChartKind::Heatmap),
        (Some(Continuous), Some(Discrete)) | (Some(Discrete), Some(Continuous)) => {
            Some(ChartKind::Strip)
        }
    }
}

/// Shelf assignments.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChartSpec {
    pub x: Option<String>,
    pub y: Option<String>,
    pub row: Option<String>,
    pub column: Option<String>,
    pub show_residuals: bool,
}

impl ChartSpec {
    pub fn xy(x: impl Into<String>, y: impl Into<String>) -> Self {
        ChartSpec {
            x: Some(x.into()),
            y: Some(y.into()),
            ..Default::default()
        }
    }
}

/// Total order on cell values: numbers (numerically) before text (lexicographically).
pub fn compare_values(a: &Value, b: &Value) -> Ordering {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => x.total_cmp(y),
        (Value::Number(_), Value::Text(_)) => Ordering::Less,
        (Value::Text(_), Value::Number(_)) => Ordering::Greater,
        (Value::Text(x), Value::Text(y)) => x.cmp(y),
    }
}

fn sorted_unique(mut values: Vec<Value>) -> Vec<Value> {
    values.sort_by(compare_values);
    values.dedup_by(|a, b| compare_values(a, b) == Ordering::Equal);
    values
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FacetCell {
    pub row: Option<Value>,
    pub column: Option<Value>,
    /// Dataset rows falling in the cell.
    pub rows: Vec<usize>,
}

/// Row-major grid of facet cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FacetGrid {
    pub row: Option<FacetAxis>,
    pub column: Option<FacetAxis>,
    pub cells: Vec<FacetCell>,
}

impl FacetGrid {
    pub fn n_rows(&self) -> usize {
        self.row.as_ref().map_or(1, |a| a.levels.len())
    }

    pub fn n_cols(&self) -> usize {
        self.column.as_ref().map_or(1, |a| a.levels.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FacetAxis {
    pub field: String,
    pub levels: Vec<Value>,
}

fn facet_axis(d: &Dataset, field: &Option<String>) -> Result<Option<FacetAxis>> {
    let Some(field) = field else {
        return Ok(None);
    };
    let col = d.column(field)?;
    if !col.ty.is_discrete() {
        return Err(Error::Unsupported(format!(
            "facet variable `{field}` must be discrete"
        )));
    }
    Ok(Some(FacetAxis {
        field: field.clone(),
        levels: sorted_unique(col.ty.levels().to_vec()),
    }))
}

/// Cross product of row × column facet levels; rows with a missing facet
/// value fall in no cell.
pub fn facet_grid(spec: &ChartSpec, d: &Dataset) -> Result<FacetGrid> {
    let row = facet_axis(d, &spec.row)?;
    let column = facet_axis(d, &spec.column)?;
    let key = |axis: &Option<FacetAxis>, r: usize| -> Option<Option<Value>> {
        match axis {
            None => Some(None),
            Some(a) => d.value(&a.field, r).ok().flatten().map(Some),
        }
    };
    let mut cells = cell_skeleton(&row, &column);
    for r in 0..d.n_rows() {
        let (Some(rv), Some(cv)) = (key(&row, r), key(&column, r)) else {
            continue;
        };
        if let Some(k) = cell_index(&row, &column, rv.as_ref(), cv.as_ref()) {
            cells[k].rows.push(r);
        }
    }
    Ok(FacetGrid { row, column, cells })
}

fn cell_skeleton(row: &Option<FacetAxis>, column: &Option<FacetAxis>) -> Vec<FacetCell> {
    let levels = |a: &Option<FacetAxis>| -> Vec<Option<Value>> {
        match a {
            None => vec![None],
            Some(a) => a.levels.iter().cloned().map(Some).collect(),
        }
    };
    let mut cells = Vec::new();
    for r in levels(row) {
        for c in levels(column) {
            cells.push(FacetCell {
                row: r.clone(),
                column: c,
                rows: Vec::new(),
            });
        }
    }
    cells
}

fn cell_index(
    row: &Option<FacetAxis>,
    column: &Option<FacetAxis>,
    rv: Option<&Value>,
    cv: Option<&Value>,
) -> Option<usize> {
    let pos = |a: &Option<FacetAxis>, v: Option<&Value>| -> Option<usize> {
        match (a, v) {
            (None, _) => Some(0),
            (Some(a), Some(v)) => a.levels.iter().position(|l| l == v),
            (Some(_), None) => None,
        }
    };
    let ncols = column.as_ref().map_or(1, |a| a.levels.len());
    Some(pos(row, rv)? * ncols + pos(column, cv)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldType {
    Quantitative,
    Nominal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Encoding {
    pub field: String,
    #[serde(rename = "type")]
    pub ty: FieldType,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<&'static str>,
    /// Additional fields drawn as overlaid layers on the same channel.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub layers: Vec<String>,
}

impl Encoding {
    fn count() -> Self {
        Encoding {
            field: "count".into(),
            ty: FieldType::Quantitative,
            aggregate: Some("count"),
            layers: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Encodings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Encoding>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Encoding>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opacity: Option<Encoding>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Scale {
    /// `None` when no finite value exists.
    Quantitative { domain: Option<[f64; 2]> },
    Nominal { domain: Vec<Value> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Scales {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Scale>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Scale>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opacity: Option<Scale>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataRef {
    /// Name of the predictive table the panel reads from.
    pub table: &'static str,
    pub source: String,
    /// Half-open range of record indices belonging to the panel.
    pub records: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Animation {
    pub field: &'static str,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRef {
    pub row: Option<Value>,
    pub column: Option<Value>,
    /// Panel records in the cell (all draws).
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Panel {
    pub index: usize,
    pub source: String,
    pub kind: ChartKind,
    pub encodings: Encodings,
    pub scales: Scales,
    pub data: DataRef,
    pub animation: Option<Animation>,
    pub converged: Option<bool>,
    pub diagnostic: Option<String>,
    pub cells: Vec<CellRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    Outcome,
    Residual,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceLine {
    pub axis: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRef {
    pub name: &'static str,
    pub columns: Vec<String>,
    pub n_records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Facets {
    pub row: Option<FacetAxis>,
    pub column: Option<FacetAxis>,
}

/// Declarative description of a model check, documented in `docs/layout-schema.md`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckLayout {
    pub version: u32,
    pub dataset: String,
    pub kind: ChartKind,
    pub view: View,
    pub facets: Facets,
    pub panels: Vec<Panel>,
    pub reference_lines: Vec<ReferenceLine>,
    pub table: TableRef,
}

pub const TABLE_NAME: &str = "predictions";

/// Layout of the bare chart: a single observed-data panel.
pub fn plain_chart(spec: &ChartSpec, d: &Dataset) -> Result<CheckLayout> {
    compose_check(spec, &PredictiveTable::observed(d))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Axis {
    X,
    Y,
}

/// Per-panel channel fields: for each axis, the fields read by each panel.
struct AxisFields {
    axis: Axis,
    per_panel: Vec<Vec<String>>,
    ty: FieldType,
}

fn field_type(d: &Dataset, field: &str) -> Result<FieldType> {
    Ok(if d.column(field)?.ty.is_discrete() {
        FieldType::Nominal
    } else {
        FieldType::Quantitative
    })
}

fn kind_of(ty: FieldType) -> ColumnKind {
    match ty {
        FieldType::Quantitative => ColumnKind::Continuous,
        FieldType::Nominal => ColumnKind::Discrete,
    }
}

fn padded(min: f64, max: f64) -> [f64; 2] {
    let range = max - min;
    let pad = if range > 0.0 {
        SCALE_PADDING * range
    } else if min != 0.0 {
        SCALE_PADDING * min.abs()
    } else {
        0.5
    };
    [min - pad, max + pad]
}

/// Grafts one panel per model onto the chart in `spec`.
///
/// Panel 0 shows the observed rows; panel `k` shows model `k-1`'s draws.
/// All panels repeat the facet grid and share every scale, whose domains
/// span observed and predicted values together.
pub fn compose_check(spec: &ChartSpec, table: &PredictiveTable) -> Result<CheckLayout> {
    let d = table.dataset();
    if spec.x.is_none() && spec.y.is_none() {
        return Err(Error::Unsupported(
            "chart needs at least one of x and y".into(),
        ));
    }
    for field in [&spec.x, &spec.y, &spec.row, &spec.column].into_iter().flatten() {
        if !d.has_column(field) {
            return Err(Error::UnknownVariable(field.clone()));
        }
    }
    let models = table.models();
    let n_panels = 1 + models.len();

    // Residual view: the axis holding the shared model outcome shows residuals.
    let mut view = View::Outcome;
    let mut residual_axis = None;
    if spec.show_residuals {
        let Some(first) = models.first() else {
            return Err(Error::Unsupported(
                "residual view needs at least one model".into(),
            ));
        };
        if models.iter().any(|m| m.response != first.response) {
            return Err(Error::Unsupported(
                "residual view needs all models to share one outcome".into(),
            ));
        }
        residual_axis = if spec.y.as_deref() == Some(&first.response) {
            Some(Axis::Y)
        } else if spec.x.as_deref() == Some(&first.response) {
            Some(Axis::X)
        } else {
            return Err(Error::Unsupported(format!(
                "residual view needs `{}` on the x or y shelf",
                first.response
            )));
        };
        view = View::Residual;
    }

    let mut axes = Vec::new();
    for (axis, field) in [(Axis::X, &spec.x), (Axis::Y, &spec.y)] {
        let Some(field) = field else { continue };
        if residual_axis == Some(axis) {
            let all: Vec<String> = (0..models.len()).map(|k| table.residual_column(k)).collect();
            let mut per_panel = vec![all];
            per_panel.extend((0..models.len()).map(|k| vec![table.residual_column(k)]));
            axes.push(AxisFields {
                axis,
                per_panel,
                ty: FieldType::Quantitative,
            });
        } else {
            axes.push(AxisFields {
                axis,
                per_panel: vec![vec![field.clone()]; n_panels],
                ty: field_type(d, field)?,
            });
        }
    }
    let x_kind = axes.iter().find(|a| a.axis == Axis::X).map(|a| kind_of(a.ty));
    let y_kind = axes.iter().find(|a| a.axis == Axis::Y).map(|a| kind_of(a.ty));
    let kind = default_chart(x_kind, y_kind).expect("at least one axis");

    // Record ranges per panel; sources are contiguous in the table.
    let records = table.records();
    let mut ranges = vec![[usize::MAX, 0]; n_panels];
    for (i, r) in records.iter().enumerate() {
        let p = panel_of(r.source);
        ranges[p][0] = ranges[p][0].min(i);
        ranges[p][1] = i + 1;
    }
    for r in &mut ranges {
        if r[0] == usize::MAX {
            *r = [0, 0];
        }
    }

    // Facet levels over every record, so predicted values of a faceted outcome get a cell.
    let facet = |field: &Option<String>| -> Result<Option<FacetAxis>> {
        let Some(axis) = facet_axis(d, field)? else {
            return Ok(None);
        };
        let mut values = axis.levels.clone();
        values.extend((0..records.len()).filter_map(|i| table.value(i, &axis.field)));
        Ok(Some(FacetAxis {
            field: axis.field,
            levels: sorted_unique(values),
        }))
    };
    let row_axis = facet(&spec.row)?;
    let column_axis = facet(&spec.column)?;
    let skeleton = cell_skeleton(&row_axis, &column_axis);
    let record_cell: Vec<Option<usize>> = (0..records.len())
        .map(|i| {
            let rv = row_axis.as_ref().map(|a| table.value(i, &a.field));
            let cv = column_axis.as_ref().map(|a| table.value(i, &a.field));
            cell_index(&row_axis, &column_axis, rv.flatten().as_ref(), cv.flatten().as_ref())
        })
        .collect();
    let mut cell_counts = vec![vec![0usize; skeleton.len()]; n_panels];
    for (i, r) in records.iter().enumerate() {
        if let Some(c) = record_cell[i] {
            cell_counts[panel_of(r.source)][c] += 1;
        }
    }

    // Shared axis scales.
    let mut axis_scales: HashMap<u8, Scale> = HashMap::new();
    for a in &axes {
        let fields: Vec<&String> = a.per_panel.iter().flatten().collect();
        let scale = match a.ty {
            FieldType::Quantitative => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for i in 0..records.len() {
                    for f in &fields {
                        if let Some(x) = table.value(i, f).and_then(|v| v.as_number()) {
                            if x.is_finite() {
                                lo = lo.min(x);
                                hi = hi.max(x);
                            }
                        }
                    }
                }
                Scale::Quantitative {
                    domain: (lo <= hi).then(|| padded(lo, hi)),
                }
            }
            FieldType::Nominal => {
                let mut values = d.column(fields[0])?.ty.levels().to_vec();
                for i in 0..records.len() {
                    values.extend(fields.iter().filter_map(|f| table.value(i, f)));
                }
                Scale::Nominal {
                    domain: sorted_unique(values),
                }
            }
        };
        axis_scales.insert(a.axis as u8, scale);
    }

    // Counts for bar heights and heatmap opacity, maximised over panels, cells and draws.
    let count_scale = match kind {
        ChartKind::Bar | ChartKind::Heatmap => {
            let mut counts: HashMap<(usize, usize, Option<usize>, String), usize> = HashMap::new();
            for (i, r) in records.iter().enumerate() {
                let Some(c) = record_cell[i] else { continue };
                let p = panel_of(r.source);
                let mut key = String::new();
                let mut complete = true;
                for a in &axes {
                    for f in &a.per_panel[p] {
                        match table.value(i, f) {
                            Some(v) => {
                                key.push_str(&format!("{v:?}|"));
                            }
                            None => complete = false,
                        }
                    }
                }
                if complete {
                    *counts.entry((p, c, r.draw, key)).or_default() += 1;
                }
            }
            let max = counts.values().copied().max().unwrap_or(0) as f64;
            Some(if kind == ChartKind::Bar {
                Scale::Quantitative {
                    domain: Some([0.0, max * (1.0 + SCALE_PADDING)]),
                }
            } else {
                Scale::Quantitative {
                    domain: Some([0.0, max]),
                }
            })
        }
        _ => None,
    };

    let mut panels = Vec::with_capacity(n_panels);
    for p in 0..n_panels {
        let mut encodings = Encodings::default();
        let mut scales = Scales::default();
        for a in &axes {
            let fields = &a.per_panel[p];
            let enc = Encoding {
                field: fields[0].clone(),
                ty: a.ty,
                aggregate: None,
                layers: if fields.len() > 1 {
                    fields[1..].to_vec()
                } else {
                    Vec::new()
                },
            };
            let scale = axis_scales[&(a.axis as u8)].clone();
            match a.axis {
                Axis::X => {
                    encodings.x = Some(enc);
                    scales.x = Some(scale);
                }
                Axis::Y => {
                    encodings.y = Some(enc);
                    scales.y = Some(scale);
                }
            }
        }
        match kind {
            ChartKind::Bar => {
                if encodings.x.is_some() {
                    encodings.y = Some(Encoding::count());
                    scales.y = count_scale.clone();
                } else {
                    encodings.x = Some(Encoding::count());
                    scales.x = count_scale.clone();
                }
            }
            ChartKind::Heatmap => {
                encodings.opacity = Some(Encoding::count());
                scales.opacity = count_scale.clone();
            }
            ChartKind::Strip | ChartKind::Scatter => {}
        }
        let model = p.checked_sub(1).map(|k| &models[k]);
        panels.push(Panel {
            index: p,
            source: table
                .source_label(if p == 0 { Source::Observed } else { Source::Model(p - 1) })
                .to_string(),
            kind,
            encodings,
            scales,
            data: DataRef {
                table: TABLE_NAME,
                source: table
                    .source_label(if p == 0 { Source::Observed } else { Source::Model(p - 1) })
                    .to_string(),
                records: ranges[p],
            },
            animation: model.map(|m| Animation {
                field: "draw",
                frames: m.n_draws,
            }),
            converged: model.map(|m| m.converged),
            diagnostic: model.and_then(|m| m.diagnostic.clone()),
            cells: skeleton
                .iter()
                .zip(&cell_counts[p])
                .map(|(c, &count)| CellRef {
                    row: c.row.clone(),
                    column: c.column.clone(),
                    count,
                })
                .collect(),
        });
    }

    let reference_lines = match residual_axis {
        Some(Axis::X) => vec![ReferenceLine { axis: "x", value: 0.0 }],
        Some(Axis::Y) => vec![ReferenceLine { axis: "y", value: 0.0 }],
        None => Vec::new(),
    };

    Ok(CheckLayout {
        version: 1,
        dataset: d.name().to_string(),
        kind,
        view,
        facets: Facets {
            row: row_axis,
            column: column_axis,
        },
        panels,
        reference_lines,
        table: TableRef {
            name: TABLE_NAME,
            columns: table.columns(),
            n_records: table.len(),
        },
    })
}

fn panel_of(source: Source) -> usize {
    match source {
        Source::Observed => 0,
        Source::Model(k) => k + 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{load_csv, load_csv_with, LoadOptions};
    use crate::family::FamilyKind;
    use crate::fit::fit_model;
    use crate::formula::ModelSpec;
    use crate::predict::assemble_check;

    #[test]
    fn smart_defaults() {
        use ColumnKind::*;
        assert_eq!(default_chart(Some(Continuous), Some(Continuous)), Some(ChartKind::Scatter));
        assert_eq!(default_chart(Some(Discrete), None), Some(ChartKind::Bar));
        assert_eq!(default_chart(None, Some(Discrete)), Some(ChartKind::Bar));
        assert_eq!(default_chart(Some(Discrete), Some(Discrete)), Some(ChartKind::Heatmap));
        assert_eq!(default_chart(Some(Continuous), None), Some(ChartKind::Strip));
        assert_eq!(default_chart(Some(Continuous), Some(Discrete)), Some(ChartKind::Strip));
        assert_eq!(default_chart(Some(Discrete), Some(Continuous)), Some(ChartKind::Strip));
        assert_eq!(default_chart(None, None), None);
    }

    fn school() -> Dataset {
        let mut csv = String::from("absences,g_edu,sex,study_time\n");
        let edu = ["none", "primary", "secondary", "higher"];
        for i in 0..24 {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                (i * 7) % 11,
                edu[i % 4],
                if i % 2 == 0 { "F" } else { "M" },
                1.0 + (i as f64) * 0.37
            ));
        }
        load_csv_with(csv.as_bytes(), "school", LoadOptions { discrete_threshold: 5 }).unwrap()
    }

    #[test]
    fn facet_grids() {
        let d = school();
        let spec = ChartSpec {
            row: Some("g_edu".into()),
            ..ChartSpec::xy("study_time", "absences")
        };
        let g = facet_grid(&spec, &d).unwrap();
        assert_eq!((g.n_rows(), g.n_cols()), (4, 1));
        assert_eq!(g.row.as_ref().unwrap().levels[0], Value::from("higher"));

        let g = facet_grid(&ChartSpec::xy("study_time", "absences"), &d).unwrap();
        assert_eq!(g.cells.len(), 1);
        assert_eq!(g.cells[0].rows.len(), 24);

        let spec = ChartSpec {
            row: Some("sex".into()),
            column: Some("g_edu".into()),
            ..ChartSpec::xy("study_time", "absences")
        };
        let g = facet_grid(&spec, &d).unwrap();
        assert_eq!(g.cells.len(), 8);
        assert_eq!(g.cells[1].row, Some(Value::from("F")));
        assert_eq!(g.cells[1].column, Some(Value::from("none")));
        assert_eq!(g.cells.iter().map(|c| c.rows.len()).sum::<usize>(), 24);

        let bad = ChartSpec {
            row: Some("study_time".into()),
            ..ChartSpec::xy("study_time", "absences")
        };
        assert!(matches!(facet_grid(&bad, &d).unwrap_err(), Error::Unsupported(_)));
    }

    #[test]
    fn two_models_share_outcome_axis() {
        let d = school();
        let m1 = fit_model(
            &d,
            &ModelSpec::parse(FamilyKind::Poisson, "absences ~ 1", None, "null").unwrap(),
        )
        .unwrap();
        let m2 = fit_model(
            &d,
            &ModelSpec::parse(FamilyKind::Poisson, "absences ~ g_edu", None, "edu").unwrap(),
        )
        .unwrap();
        let t = assemble_check(&d, &[m1, m2], 5, 11).unwrap();
        let layout = compose_check(&ChartSpec::xy("study_time", "absences"), &t).unwrap();
        assert_eq!(layout.kind, ChartKind::Scatter);
        assert_eq!(layout.panels.len(), 3);
        let y0 = serde_json::to_string(&layout.panels[0].scales.y).unwrap();
        for p in &layout.panels {
            assert_eq!(serde_json::to_string(&p.scales.y).unwrap(), y0);
        }
        assert_eq!(layout.panels[1].data.records, [24, 24 + 24 * 5]);
        assert_eq!(layout.panels[2].animation.as_ref().unwrap().frames, 5);
        assert!(layout.panels[0].animation.is_none());

        // Domain covers observed and predicted values with padding.
        let Some(Scale::Quantitative { domain: Some([lo, hi]) }) = &layout.panels[0].scales.y else {
            panic!()
        };
        for i in 0..t.len() {
            let v = t.value(i, "absences").unwrap().as_number().unwrap();
            assert!(*lo < v && v < *hi);
        }
    }

    #[test]
    fn zero_models_is_plain_chart() {
        let d = school();
        let t = assemble_check(&d, &[], 7, 3).unwrap();
        let spec = ChartSpec::xy("study_time", "absences");
        assert_eq!(compose_check(&spec, &t).unwrap(), plain_chart(&spec, &d).unwrap());
        let layout = plain_chart(&spec, &d).unwrap();
        assert_eq!(layout.panels.len(), 1);
        // study_time spans 1 .. 1 + 23·0.37; 5% padding on each side.
        let span = 23.0 * 0.37;
        let Some(Scale::Quantitative { domain: Some([lo, hi]) }) = layout.panels[0].scales.x else {
            panic!()
        };
        assert!((lo - (1.0 - 0.05 * span)).abs() < 1e-12);
        assert!((hi - (1.0 + span + 0.05 * span)).abs() < 1e-12);
    }

    #[test]
    fn bar_and_heatmap_counts() {
        let d = school();
        let bar = plain_chart(
            &ChartSpec {
                x: Some("g_edu".into()),
                ..Default::default()
            },
            &d,
        )
        .unwrap();
        assert_eq!(bar.kind, ChartKind::Bar);
        let p = &bar.panels[0];
        assert_eq!(p.encodings.y.as_ref().unwrap().aggregate, Some("count"));
        assert_eq!(
            p.scales.y,
            Some(Scale::Quantitative {
                domain: Some([0.0, 6.0 * 1.05])
            })
        );

        let heat = plain_chart(&ChartSpec::xy("g_edu", "sex"), &d).unwrap();
        assert_eq!(heat.kind, ChartKind::Heatmap);
        assert_eq!(
            heat.panels[0].scales.opacity,
            Some(Scale::Quantitative {
                domain: Some([0.0, 6.0])
            })
        );
    }

    #[test]
    fn residual_view() {
        let d = load_csv("y,x\n1,0.5\n2,1.5\n3,1.0\n5,2.5\n4,2\n6,3\n2,0.7\n5,2.2\n7,3.3\n8,3.9\n9,4.4\n3,1.1\n".as_bytes(), "r").unwrap();
        let m = fit_model(&d, &ModelSpec::parse(FamilyKind::Normal, "y ~ x", None, "lin").unwrap()).unwrap();
        let t = assemble_check(&d, &[m], 3, 2).unwrap();
        let spec = ChartSpec {
            show_residuals: true,
            ..ChartSpec::xy("x", "y")
        };
        let layout = compose_check(&spec, &t).unwrap();
        assert_eq!(layout.view, View::Residual);
        assert_eq!(layout.reference_lines, vec![ReferenceLine { axis: "y", value: 0.0 }]);
        assert_eq!(layout.panels[1].encodings.y.as_ref().unwrap().field, "residual:lin");
        assert_eq!(layout.panels[0].scales.y, layout.panels[1].scales.y);

        let none = assemble_check(&d, &[], 3, 2).unwrap();
        assert!(matches!(compose_check(&spec, &none).unwrap_err(), Error::Unsupported(_)));
    }

    #[test]
    fn unknown_fields_rejected() {
        let d = school();
        assert_eq!(
            plain_chart(&ChartSpec::xy("ghost", "absences"), &d).unwrap_err(),
            Error::UnknownVariable("ghost".into())
        );
        assert!(plain_chart(&ChartSpec::default(), &d).is_err());
    }
}
