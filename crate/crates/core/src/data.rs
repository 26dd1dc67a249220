//! Column-named tabular data and strict CSV ingestion.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("file has no data rows")]
    Empty,
    #[error("target column '{0}' not found in header")]
    MissingTarget(String),
    #[error("line {line}: expected {expected} fields, found {found}")]
    Ragged {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: cannot parse '{value}' in column '{column}'")]
    Unparsable {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: non-finite value in column '{column}'")]
    NonFinite { line: u64, column: String },
    #[error("duplicate column name '{0}'")]
    DuplicateName(String),
    #[error("inconsistent dataset: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    feature_names: Vec<String>,
    target_name: String,
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    standardization: Option<Standardization>,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        targets: Vec<f64>,
        target_name: String,
    ) -> Result<Self, DataError> {
        if rows.is_empty() {
            return Err(DataError::Empty);
        }
        if rows.len() != targets.len() {
            return Err(DataError::Shape(format!(
                "{} rows but {} targets",
                rows.len(),
                targets.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in feature_names.iter().chain(std::iter::once(&target_name)) {
            if !seen.insert(name.as_str()) {
                return Err(DataError::DuplicateName(name.clone()));
            }
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != feature_names.len() {
                return Err(DataError::Shape(format!(
                    "row {i} has {} values, expected {}",
                    r.len(),
                    feature_names.len()
                )));
            }
            if let Some(j) = r.iter().position(|v| !v.is_finite()) {
                return Err(DataError::NonFinite {
                    line: i as u64 + 1,
                    column: feature_names[j].clone(),
                });
            }
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(DataError::NonFinite {
                line: 0,
                column: target_name,
            });
        }
        Ok(Self {
            feature_names,
            target_name,
            rows,
            targets,
            standardization: None,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (0..self.dim())
            .map(|j| self.rows.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect()
    }

    pub fn column_stds(&self) -> Vec<f64> {
        let means = self.column_means();
        let n = self.len() as f64;
        (0..self.dim())
            .map(|j| {
                (self.rows.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / n).sqrt()
            })
            .collect()
    }

    /// Records per-column mean and standard deviation without altering the data.
    pub fn with_standardization_stats(mut self) -> Self {
        self.standardization = Some(Standardization {
            mean: self.column_means(),
            std: self.column_stds(),
        });
        self
    }

    /// Per-column empirical quantile (linear interpolation between order statistics).
    pub fn column_quantiles(&self, q: f64) -> Vec<f64> {
        (0..self.dim())
            .map(|j| {
                let mut col: Vec<f64> = self.rows.iter().map(|r| r[j]).collect();
                col.sort_by(|a, b| a.total_cmp(b));
                let pos = q.clamp(0.0, 1.0) * (col.len() - 1) as f64;
                let lo = pos.floor() as usize;
                let hi = pos.ceil() as usize;
                col[lo] + (pos - lo as f64) * (col[hi] - col[lo])
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CsvMode {
    #[default]
    Strict,
    SkipBadRows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvReport {
    pub rows_read: usize,
    pub columns: Vec<String>,
    pub target: String,
    pub skipped: Vec<String>,
}

/// Reads a CSV with a header row. Every column except `target_column` becomes a feature.
pub fn load_csv(path: &Path, target_column: &str, mode: CsvMode) -> Result<(Dataset, CsvReport), DataError> {
    load_csv_excluding(path, target_column, &[], mode)
}

/// Like [`load_csv`], ignoring the named columns (for example a row id).
pub fn load_csv_excluding(
    path: &Path,
    target_column: &str,
    exclude: &[String],
    mode: CsvMode,
) -> Result<(Dataset, CsvReport), DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(DataError::Empty);
    }
    let target_idx = header
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| DataError::MissingTarget(target_column.to_string()))?;
    if let Some(missing) = exclude.iter().find(|c| !header.contains(c)) {
        return Err(DataError::Shape(format!("excluded column '{missing}' not in header")));
    }
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&i| i != target_idx && !exclude.contains(&header[i]))
        .collect();
    let feature_names: Vec<String> = feature_cols.iter().map(|&i| header[i].clone()).collect();

    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let mut skipped = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let parsed = parse_record(&record, &header, line);
        match parsed {
            Ok(values) => {
                targets.push(values[target_idx]);
                rows.push(feature_cols.iter().map(|&i| values[i]).collect());
            }
            Err(e) => match mode {
                CsvMode::Strict => return Err(e),
                CsvMode::SkipBadRows => skipped.push(e.to_string()),
            },
        }
    }
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    let report = CsvReport {
        rows_read: rows.len(),
        columns: header.clone(),
        target: target_column.to_string(),
        skipped,
    };
    let data = Dataset::new(feature_names, rows, targets, target_column.to_string())?;
    Ok((data, report))
}

fn parse_record(record: &csv::StringRecord, header: &[String], line: u64) -> Result<Vec<f64>, DataError> {
    if record.len() != header.len() {
        return Err(DataError::Ragged {
            line,
            expected: header.len(),
            found: record.len(),
        });
    }
    record
        .iter()
        .zip(header)
        .map(|(cell, column)| {
            let v: f64 = cell.parse().map_err(|_| DataError::Unparsable {
                line,
                column: column.clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DataError::NonFinite {
                    line,
                    column: column.clone(),
                });
            }
            Ok(v)
        })
        .collect()
}

/// Writes a dataset as CSV with the target as the last column.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = data.feature_names.iter().map(String::as_str).collect();
    header.push(&data.target_name);
    w.write_record(&header)?;
    for (r, t) in data.rows.iter().zip(&data.targets) {
        let mut rec: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        rec.push(t.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_well_formed_file() {
        let f = write("a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
        let (d, report) = load_csv(f.path(), "y", CsvMode::Strict).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.dim(), 2);
        assert_eq!(d.targets(), &[3.0, 6.0, 9.0]);
        assert_eq!(report.rows_read, 3);
    }

    #[test]
    fn excluded_columns_are_dropped() {
        let f = write("id,a,y\n1,2,3\n2,5,6\n");
        let (d, _) = load_csv_excluding(f.path(), "y", &["id".into()], CsvMode::Strict).unwrap();
        assert_eq!(d.feature_names(), &["a".to_string()]);
        assert_eq!(d.rows()[1], vec![5.0]);
        assert!(load_csv_excluding(f.path(), "y", &["zz".into()], CsvMode::Strict).is_err());
    }

    #[test]
    fn target_may_be_any_column() {
        let f = write("y,a\n1,2\n3,4\n");
        let (d, _) = load_csv(f.path(), "y", CsvMode::Strict).unwrap();
        assert_eq!(d.feature_names(), &["a".to_string()]);
        assert_eq!(d.rows()[1], vec![4.0]);
    }

    #[test]
    fn corrupt_row_names_line() {
        let f = write("a,y\n1,2\nx,3\n5,6\n");
        let err = load_csv(f.path(), "y", CsvMode::Strict).unwrap_err();
        match err {
            DataError::Unparsable { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        let (d, report) = load_csv(f.path(), "y", CsvMode::SkipBadRows).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(report.skipped.len(), 1);
    }

    #[test]
    fn ragged_and_missing_and_empty() {
        let f = write("a,y\n1,2\n3\n");
        assert!(matches!(
            load_csv(f.path(), "y", CsvMode::Strict),
            Err(DataError::Ragged { line: 3, .. })
        ));
        let f = write("a,b\n1,2\n");
        assert!(matches!(load_csv(f.path(), "y", CsvMode::Strict), Err(DataError::MissingTarget(_))));
        let f = write("a,y\n");
        assert!(matches!(load_csv(f.path(), "y", CsvMode::Strict), Err(DataError::Empty)));
        let f = write("");
        assert!(load_csv(f.path(), "y", CsvMode::Strict).is_err());
    }

    #[test]
    fn rejects_non_finite_and_duplicates() {
        let f = write("a,y\nNaN,1\n");
        assert!(matches!(load_csv(f.path(), "y", CsvMode::Strict), Err(DataError::NonFinite { .. })));
        assert!(matches!(
            Dataset::new(vec!["a".into(), "a".into()], vec![vec![1.0, 2.0]], vec![0.0], "y".into()),
            Err(DataError::DuplicateName(_))
        ));
    }

    #[test]
    fn quantiles_and_means() {
        let d = Dataset::new(
            vec!["a".into()],
            (0..5).map(|i| vec![i as f64]).collect(),
            vec![0.0; 5],
            "y".into(),
        )
        .unwrap();
        assert_eq!(d.column_quantiles(0.75), vec![3.0]);
        assert_eq!(d.column_means(), vec![2.0]);
    }
}
