//! CSV tables and atomic file writes.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use tempfile::NamedTempFile;

/// Writes through a temporary file in the target directory, then renames,
/// so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = staged(path)?;
    tmp.write_all(bytes)?;
    commit(tmp, path)
}

/// A temporary file next to `path`; removed on drop unless committed.
pub fn staged(path: &Path) -> Result<NamedTempFile> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    NamedTempFile::new_in(dir).with_context(|| format!("creating a temporary file in {}", dir.display()))
}

pub fn commit(tmp: NamedTempFile, path: &Path) -> Result<()> {
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Numeric CSV with a header row. Lines starting with `#` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Raw fields of each row, for echoing.
    pub raw: Vec<Vec<String>>,
}

/// Reads a table whose first `columns` fields must parse as finite numbers.
/// Row numbers in messages count data rows from 1.
pub fn read_table(path: &Path, columns: usize) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header.iter().all(String::is_empty) {
        return Ok(Table { header: vec![], rows: vec![], raw: vec![] });
    }
    if header.len() < columns {
        bail!("{}: header has {} columns, expected at least {columns}", path.display(), header.len());
    }
    let mut rows = Vec::new();
    let mut raw = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.with_context(|| format!("{}: row {row}", path.display()))?;
        let mut values = Vec::with_capacity(columns);
        for (c, name) in header.iter().enumerate().take(columns) {
            let field = record.get(c).unwrap_or("");
            if field.is_empty() {
                bail!("{}: row {row}: missing value in column '{name}'", path.display());
            }
            let v: f64 = field
                .parse()
                .map_err(|_| anyhow::anyhow!("{}: row {row}: '{field}' in column '{}' is not a number", path.display(), header[c]))?;
            if !v.is_finite() {
                bail!("{}: row {row}: non-finite value in column '{}'", path.display(), header[c]);
            }
            values.push(v);
        }
        rows.push(values);
        raw.push(record.iter().map(str::to_owned).collect());
    }
    Ok(Table { header, rows, raw })
}
