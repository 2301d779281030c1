use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ReportFormat;
use crate::error::CliResult;

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Writes `rows` as `<stem>.csv` or `<stem>.json` and returns the path.
pub fn write_table<T: Serialize>(dir: &Path, stem: &str, rows: &[T], format: ReportFormat) -> CliResult<PathBuf> {
    match format {
        ReportFormat::Csv => {
            let path = dir.join(format!("{stem}.csv"));
            let mut w = csv::Writer::from_path(&path)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
            Ok(path)
        }
        ReportFormat::Json => {
            let path = dir.join(format!("{stem}.json"));
            let mut text = serde_json::to_string_pretty(rows)?;
            text.push('\n');
            fs::write(&path, text)?;
            Ok(path)
        }
    }
}

pub fn write_bytes(dir: &Path, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, bytes)?;
    Ok(path)
}
