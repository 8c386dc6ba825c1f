//! CSV datasets: a header row, numeric feature columns, and 0/1 label and
//! protected-group columns in any position.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use fairbayes_core::LabeledDataset;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CsvOptions<'a> {
    pub label_col: &'a str,
    pub protected_col: &'a str,
    /// Accept group ids above 1.
    pub multigroup: bool,
}

impl<'a> CsvOptions<'a> {
    pub fn new(label_col: &'a str, protected_col: &'a str) -> Self {
        CsvOptions { label_col, protected_col, multigroup: false }
    }
}

/// A dataset with the names of its feature columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub data: LabeledDataset,
    pub feature_names: Vec<String>,
}

pub fn ingest_csv(path: impl AsRef<Path>, label_col: &str, protected_col: &str) -> Result<LabeledDataset> {
    read_csv_file(path, &CsvOptions::new(label_col, protected_col)).map(|t| t.data)
}

pub fn read_csv_file(path: impl AsRef<Path>, opts: &CsvOptions<'_>) -> Result<Table> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, opts)
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Input(format!("column '{name}' not found in header")))
}

pub fn read_csv<R: Read>(reader: R, opts: &CsvOptions<'_>) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || headers.iter().all(|h| h.trim().is_empty()) {
        return Err(Error::Input("empty file: no header row".into()));
    }
    let label_idx = column(&headers, opts.label_col)?;
    let group_idx = column(&headers, opts.protected_col)?;
    if label_idx == group_idx {
        return Err(Error::Input("label and protected columns must differ".into()));
    }
    let feature_idx: Vec<usize> = (0..headers.len()).filter(|&i| i != label_idx && i != group_idx).collect();
    let feature_names = feature_idx.iter().map(|&i| headers[i].trim().to_string()).collect();

    let mut data = LabeledDataset::new(feature_idx.len());
    let mut x = vec![0.0; feature_idx.len()];
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let label = match field(label_idx) {
            "0" => 0u8,
            "1" => 1,
            other => {
                return Err(Error::Parse { line, message: format!("label '{other}' is not 0 or 1") });
            }
        };
        let group: u8 = field(group_idx)
            .parse()
            .map_err(|_| Error::Parse { line, message: format!("protected value '{}' is not a group id", field(group_idx)) })?;
        if group > 1 && !opts.multigroup {
            return Err(Error::Parse { line, message: format!("protected value '{group}' is not 0 or 1") });
        }
        for (slot, &i) in x.iter_mut().zip(&feature_idx) {
            *slot = field(i).parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| Error::Parse {
                line,
                message: format!("feature '{}' has non-numeric value '{}'", &headers[i], field(i)),
            })?;
        }
        data.push(&x, group, label).map_err(|e| Error::Parse { line, message: e.to_string() })?;
    }
    if data.is_empty() {
        return Err(Error::Input("file has a header but no data rows".into()));
    }
    Ok(Table { data, feature_names })
}

/// Writes features, then the label and protected columns. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(writer: W, table: &Table, label_col: &str, protected_col: &str) -> Result<()> {
    let data = &table.data;
    if table.feature_names.len() != data.dim() {
        return Err(Error::Input("feature name count differs from dimension".into()));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = table.feature_names.iter().map(String::as_str).collect();
    header.push(label_col);
    header.push(protected_col);
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut row: Vec<String> = data.row(i).iter().map(|v| v.to_string()).collect();
        row.push(data.labels()[i].to_string());
        row.push(data.groups()[i].to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

/// Default feature names `x1..xd`.
pub fn default_feature_names(dim: usize) -> Vec<String> {
    (1..=dim).map(|j| format!("x{j}")).collect()
}
