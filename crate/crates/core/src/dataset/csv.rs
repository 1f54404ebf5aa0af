use std::io::Read;

use super::{Column, ColumnData, Dataset};
use crate::error::{Error, Result};

pub const DEFAULT_DISCRETE_THRESHOLD: usize = 10;

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    /// Numeric columns with at most this many distinct values load as discrete.
    pub discrete_threshold: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            discrete_threshold: DEFAULT_DISCRETE_THRESHOLD,
        }
    }
}

pub fn load_csv<R: Read>(source: R, name: &str) -> Result<Dataset> {
    load_csv_with(source, name, LoadOptions::default())
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t == "NA"
}

pub fn load_csv_with<R: Read>(source: R, name: &str, options: LoadOptions) -> Result<Dataset> {
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv {
            row: 0,
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::EmptyDataset);
    }

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for (i, record) in reader.records().enumerate() {
        // Data rows are numbered from 1; the header is row 0.
        let row = i + 1;
        let record = record.map_err(|e| Error::Csv {
            row,
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Csv {
                row,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (col, field) in cells.iter_mut().zip(record.iter()) {
            col.push(field.to_string());
        }
    }
    if cells[0].is_empty() {
        return Err(Error::EmptyDataset);
    }

    let columns = headers
        .into_iter()
        .zip(cells)
        .map(|(header, raw)| {
            let numeric: Option<Vec<Option<f64>>> = raw
                .iter()
                .map(|c| {
                    if is_missing(c) {
                        Some(None)
                    } else {
                        c.trim().parse::<f64>().ok().filter(|x| x.is_finite()).map(Some)
                    }
                })
                .collect();
            let data = match numeric {
                Some(values) => ColumnData::Numeric(values),
                None => ColumnData::Text(
                    raw.into_iter()
                        .map(|c| (!is_missing(&c)).then(|| c.trim().to_string()))
                        .collect(),
                ),
            };
            Column::infer(header, data, options.discrete_threshold)
        })
        .collect();
    Dataset::new(name, columns)
}
