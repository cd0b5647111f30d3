//! Line-oriented persistence of validated objects.
//!
//! Layout: a header line [`FORMAT_HEADER`], then one JSON object per line in
//! the field order of [`DebrisObject`], sorted by COSPAR id. An empty list is
//! stored as an empty file.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use super::DebrisObject;

pub const FORMAT_HEADER: &str = "debris-triage/1";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt record at line {line}: {message}")]
    CorruptRecord { line: usize, message: String },
}

pub fn encode(objects: &[DebrisObject]) -> String {
    if objects.is_empty() {
        return String::new();
    }
    let mut sorted: Vec<&DebrisObject> = objects.iter().collect();
    sorted.sort_by(|a, b| a.cospar_id.cmp(&b.cospar_id));
    let mut out = String::with_capacity(64 + objects.len() * 512);
    out.push_str(FORMAT_HEADER);
    out.push('\n');
    for object in sorted {
        out.push_str(&serde_json::to_string(object).expect("object serializes"));
        out.push('\n');
    }
    out
}

pub fn decode(text: &str) -> Result<Vec<DebrisObject>, StoreError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        None => return Ok(Vec::new()),
        Some((_, header)) if header == FORMAT_HEADER => {}
        Some((_, header)) => {
            return Err(StoreError::CorruptRecord {
                line: 1,
                message: format!("unsupported header {header:?}"),
            })
        }
    }
    let mut objects = Vec::new();
    for (index, line) in lines {
        let line_no = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let object: DebrisObject = serde_json::from_str(line).map_err(|e| StoreError::CorruptRecord {
            line: line_no,
            message: e.to_string(),
        })?;
        if let Some(first) = object.violations().first() {
            return Err(StoreError::CorruptRecord {
                line: line_no,
                message: first.to_string(),
            });
        }
        objects.push(object);
    }
    Ok(objects)
}

/// Writes `objects` to `path` atomically and returns the record count.
pub fn store(objects: &[DebrisObject], path: &Path) -> Result<usize, StoreError> {
    write_atomic(path, encode(objects).as_bytes())?;
    Ok(objects.len())
}

pub fn load(path: &Path) -> Result<Vec<DebrisObject>, StoreError> {
    let text = fs::read_to_string(path).map_err(|source| io_failure(path, source))?;
    decode(&text)
}

fn io_failure(path: &Path, source: std::io::Error) -> StoreError {
    StoreError::IoFailure {
        path: path.display().to_string(),
        source,
    }
}

/// Write-to-temp then rename, so readers never observe a truncated file.
/// Missing parent directories are created.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| io_failure(path, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_failure(path, e))?;
    tmp.write_all(bytes).map_err(|e| io_failure(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_failure(path, e))?;
    tmp.persist(path).map_err(|e| io_failure(path, e.error))?;
    Ok(())
}
