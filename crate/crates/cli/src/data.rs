use std::path::Path;

use anyhow::{bail, Context, Result};
use ppls::Mat;

/// Headerless numeric CSV, one observation per row.
pub fn read_matrix(path: &Path) -> Result<Mat> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: row {}", path.display(), i + 1))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => bail!(
                "{}: row {} has {} fields, expected {c}",
                path.display(),
                i + 1,
                record.len()
            ),
            _ => {}
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().with_context(|| {
                format!(
                    "{}: row {}, column {}: not a number: `{field}`",
                    path.display(),
                    i + 1,
                    j + 1
                )
            })?;
            if !v.is_finite() {
                bail!(
                    "{}: row {}, column {}: non-finite value",
                    path.display(),
                    i + 1,
                    j + 1
                );
            }
            values.push(v);
        }
        rows += 1;
    }
    let Some(cols) = cols else {
        bail!("{}: no data rows", path.display());
    };
    Ok(Mat::from_row_slice(rows, cols, &values))
}

pub fn write_matrix(path: &Path, m: &Mat) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}
