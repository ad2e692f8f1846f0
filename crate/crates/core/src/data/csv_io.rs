use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::OrdinalDataset;
use crate::error::{Result, StormError};

fn csv_err(path: &Path, row: usize, message: impl Into<String>) -> StormError {
    StormError::Csv { path: path.display().to_string(), row, message: message.into() }
}

/// Reads a comma-delimited file with a header row. `label_column` names the integer
/// label column; every other column is a real-valued feature.
///
/// Row numbers in errors are 1-based data rows (the header is row 0).
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, k: usize) -> Result<OrdinalDataset> {
    let path = path.as_ref();
    let table = read_table(path, label_column, Some(k))?;
    if table.labels.is_none() {
        return Err(csv_err(path, 0, format!("no column named '{label_column}'")));
    }
    OrdinalDataset::from_flat(
        table.dim,
        table.features,
        table.labels.unwrap_or_default(),
        k,
        path.display().to_string(),
    )
}

/// Reads feature rows for prediction. A column named `label_column` is dropped if
/// present; every other column must be numeric. Returns `(dim, row-major features)`.
pub fn load_features(path: impl AsRef<Path>, label_column: &str) -> Result<(usize, Vec<f64>)> {
    let table = read_table(path.as_ref(), label_column, None)?;
    Ok((table.dim, table.features))
}

struct Table {
    dim: usize,
    features: Vec<f64>,
    labels: Option<Vec<usize>>,
}

/// Labels are range-checked against `k` when given; without `k` the label column is
/// skipped.
fn read_table(path: &Path, label_column: &str, k: Option<usize>) -> Result<Table> {
    let file = File::open(path).map_err(|e| csv_err(path, 0, format!("cannot open: {e}")))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(file);
    let headers = reader.headers().map_err(|e| csv_err(path, 0, e.to_string()))?.clone();
    let label_idx = headers.iter().position(|h| h.trim() == label_column);
    let dim = headers.len() - usize::from(label_idx.is_some());
    if dim == 0 {
        return Err(csv_err(path, 0, "no feature columns"));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                csv_err(path, row, format!("ragged row: expected {expected_len} fields, found {len}"))
            }
            _ => csv_err(path, row, e.to_string()),
        })?;
        for (col, cell) in record.iter().enumerate() {
            if Some(col) == label_idx && k.is_none() {
                continue;
            }
            let cell = cell.trim();
            let value: f64 = cell
                .parse()
                .map_err(|_| csv_err(path, row, format!("column '{}': '{cell}' is not a number", &headers[col])))?;
            if !value.is_finite() {
                return Err(csv_err(path, row, format!("column '{}': non-finite value '{cell}'", &headers[col])));
            }
            match (Some(col) == label_idx, k) {
                (true, Some(k)) => {
                    if value.fract() != 0.0 || value < 1.0 || value > k as f64 {
                        return Err(csv_err(path, row, format!("label {cell} outside 1..={k}")));
                    }
                    labels.push(value as usize);
                }
                _ => features.push(value),
            }
        }
    }
    let labels = (label_idx.is_some() && k.is_some()).then_some(labels);
    Ok(Table { dim, features, labels })
}

/// Writes features as `x1..xD` and the label as `label`, using shortest round-trip
/// formatting so that loading recovers every value exactly.
pub fn save_csv(data: &OrdinalDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for d in 1..=data.dim() {
        out.push_str(&format!("x{d},"));
    }
    out.push_str("label\n");
    for (row, y) in data.rows().zip(data.labels()) {
        for v in row {
            out.push_str(&format!("{v:?},"));
        }
        out.push_str(&format!("{y}\n"));
    }
    write_atomic(path, out.as_bytes())
}

/// Writes to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name =
        path.file_name().ok_or_else(|| StormError::arg(format!("'{}' is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_well_formed_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "f1,grade,f2\n0.5,1,2\n1.5,3,-1e-3\n2,5,7\n");
        let d = load_csv(&p, "grade", 5).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.dim(), 2);
        assert_eq!(d.labels(), &[1, 3, 5]);
        assert_eq!(d.row(1), &[1.5, -1e-3]);
    }

    #[test]
    fn reports_offending_rows() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            ("x,label\n1,2\n1,0\n", "row 2", "outside"),
            ("x,label\n1,2\nfoo,1\n", "row 2", "not a number"),
            ("x,label\n1,2\n1,2,3\n", "row 2", "ragged"),
            ("x,label\nNaN,2\n", "row 1", "non-finite"),
            ("x,label\n1,2.5\n", "row 1", "outside"),
        ];
        for (body, row, what) in cases {
            let p = write(&dir, "bad.csv", body);
            let msg = load_csv(&p, "label", 5).unwrap_err().to_string();
            assert!(msg.contains(row) && msg.contains(what), "{msg}");
        }
        assert!(load_csv(dir.path().join("missing.csv"), "label", 5).is_err());
        let p = write(&dir, "nolabel.csv", "x,y\n1,2\n");
        assert!(load_csv(&p, "label", 5).unwrap_err().to_string().contains("no column"));
    }

    #[test]
    fn save_then_load_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let vals = [0.1, 1.0 / 3.0, -2.5e-300, 12345.678901234567, f64::MAX, -0.0];
        let rows: Vec<Vec<f64>> = vals.iter().map(|&v| vec![v, v * 0.7]).collect();
        let d = OrdinalDataset::from_rows(&rows, vec![1, 2, 3, 1, 2, 3], 3, "t").unwrap();
        let p = dir.path().join("rt.csv");
        save_csv(&d, &p).unwrap();
        let back = load_csv(&p, "label", 3).unwrap();
        assert_eq!(back.features(), d.features());
        assert_eq!(back.labels(), d.labels());
    }
}
