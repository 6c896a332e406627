//! CSV helpers shared by the loaders and writers.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Reads rows of at least `ncols` numeric fields. A first row that does not
/// parse as numbers is treated as a header; blank lines and `#` comments are
/// skipped.
pub fn read_numeric_csv(path: &Path, ncols: usize) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().take(ncols).map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) if v.len() == ncols => rows.push(v),
            Err(_) if i == 0 => continue,
            _ => {
                return Err(Error::Csv(format!(
                    "{}: line {} needs {ncols} numeric columns",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Csv(format!("{}: no data rows", path.display())));
    }
    Ok(rows)
}

/// Writes a header and rows of already-formatted fields.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(header).map_err(|e| Error::Csv(e.to_string()))?;
    for row in rows {
        w.write_record(row).map_err(|e| Error::Csv(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Formats a float so that it round-trips exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_with_and_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        std::fs::write(&p, "alt,rho\n0,1.5\n# note\n1000, 1.2e-1\n").unwrap();
        assert_eq!(read_numeric_csv(&p, 2).unwrap(), vec![vec![0.0, 1.5], vec![1000.0, 0.12]]);
        std::fs::write(&p, "0,1.5\n1,x\n").unwrap();
        assert!(read_numeric_csv(&p, 2).is_err());
    }

    #[test]
    fn write_then_read_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.csv");
        let x = 0.1 + 0.2;
        write_csv(&p, &["a", "b"], vec![vec![fmt_f64(x), fmt_f64(-3.0)]]).unwrap();
        assert_eq!(read_numeric_csv(&p, 2).unwrap(), vec![vec![x, -3.0]]);
    }
}
