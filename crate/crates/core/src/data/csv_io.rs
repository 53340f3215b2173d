use std::path::Path;

use super::dataset::{Dataset, MISSING};
use crate::error::{Error, Result};

pub const DEFAULT_MISSING_TOKENS: &[&str] = &["", "NA"];

/// Reads a headered CSV file. Every non-label column becomes a feature; cells
/// equal to one of `missing_tokens` become missing values.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, missing_tokens: &[&str]) -> Result<Dataset> {
    let reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path.as_ref())?;
    read_csv(reader, label_column, missing_tokens)
}

pub fn read_csv<R: std::io::Read>(
    mut reader: csv::Reader<R>,
    label_column: &str,
    missing_tokens: &[&str],
) -> Result<Dataset> {
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Ingestion {
            row: 0,
            column: label_column.to_string(),
            message: "label column not found in header".into(),
        })?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != headers.len() {
            return Err(Error::Ingestion {
                row,
                column: "*".into(),
                message: format!("expected {} cells, found {}", headers.len(), record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            let missing = missing_tokens.contains(&cell);
            if c == label_idx {
                if missing {
                    return Err(Error::Ingestion {
                        row,
                        column: headers[c].clone(),
                        message: "label is missing".into(),
                    });
                }
                labels.push(parse_cell(cell, row, &headers[c])?);
            } else if missing {
                values.push(MISSING);
            } else {
                values.push(parse_cell(cell, row, &headers[c])?);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::Ingestion {
            row: 0,
            column: "*".into(),
            message: "file has a header but no data rows".into(),
        });
    }
    Ok(Dataset::from_parts(feature_names.len(), values, labels, feature_names)?.with_label_name(label_column))
}

fn parse_cell(cell: &str, row: usize, column: &str) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Ingestion {
            row,
            column: column.to_string(),
            message: format!("cannot parse {cell:?} as a finite number"),
        }),
    }
}

/// Writes features followed by the label column; missing values become `NA`.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let mut header: Vec<&str> = ds.feature_names().iter().map(String::as_str).collect();
    header.push(ds.label_name());
    w.write_record(&header)?;
    for (i, row) in ds.rows().enumerate() {
        let mut rec: Vec<String> = row
            .iter()
            .map(|v| if v.is_nan() { "NA".to_string() } else { v.to_string() })
            .collect();
        rec.push(ds.label(i).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
