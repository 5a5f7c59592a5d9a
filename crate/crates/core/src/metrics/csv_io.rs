//! Dataset CSV format: a header row `timestamp,<metric>,...`, then one row
//! per scrape. UTF-8, `.` as decimal separator. Values are written in their
//! shortest round-tripping form, so export followed by import is exact.

use std::io::{Read, Write};
use std::path::Path;

use super::catalog::Catalog;
use super::{Dataset, MetricsError, Result};

pub fn write_csv<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = Vec::with_capacity(dataset.width() + 1);
    header.push("timestamp".to_string());
    header.extend(dataset.columns.iter().cloned());
    w.write_record(&header)?;
    for (t, row) in dataset.timestamps.iter().zip(&dataset.rows) {
        let mut record = Vec::with_capacity(row.len() + 1);
        record.push(t.to_string());
        record.extend(row.iter().map(f64::to_string));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut records = r.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(MetricsError::EmptyDataset),
    };
    let expected = header.len();
    let columns: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();

    let mut timestamps = Vec::new();
    let mut rows = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != expected {
            return Err(MetricsError::RaggedRow { line, expected, found: record.len() });
        }
        let mut values = Vec::with_capacity(expected);
        for (i, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| MetricsError::NonNumeric {
                line,
                column: if i == 0 { "timestamp".into() } else { columns[i - 1].clone() },
                value: cell.to_owned(),
            })?;
            values.push(v);
        }
        timestamps.push(values[0]);
        values.remove(0);
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    Ok(Dataset::new(columns, timestamps, rows))
}

pub fn export_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(dataset, std::io::BufWriter::new(file))
}

pub fn import_csv(path: &Path) -> Result<Dataset> {
    read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// Imports and checks the width against a catalog.
pub fn import_csv_with_catalog(path: &Path, catalog: &Catalog) -> Result<Dataset> {
    let d = import_csv(path)?;
    if d.width() != catalog.width() {
        return Err(MetricsError::WidthMismatch { expected: catalog.width(), found: d.width() });
    }
    Ok(d)
}
