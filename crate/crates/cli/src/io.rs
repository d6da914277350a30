use std::fs;
use std::io::{BufReader, Write};
use std::path::Path;

use mtp_core::mtp_data::{read_dataset, write_dataset, DatasetRecord, Strictness};
use serde::Serialize;

use crate::error::CliError;

pub fn load_dataset(path: &Path, strict: bool) -> Result<Vec<DatasetRecord>, CliError> {
    let file = fs::File::open(path).map_err(CliError::io(path))?;
    let strictness = if strict {
        Strictness::Strict
    } else {
        Strictness::Lenient
    };
    let (records, warnings) = read_dataset(BufReader::new(file), strictness)
        .map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
    for w in warnings {
        log::warn!("{}:{}: {}", path.display(), w.line, w.message);
    }
    Ok(records)
}

/// Writes through a sibling temp file so readers never see partial output.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(CliError::io(parent))?;
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp-{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(CliError::io(&tmp))?;
    fs::rename(&tmp, path).map_err(CliError::io(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("value serializes");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut bytes = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut bytes, row).expect("row serializes");
        bytes.push(b'\n');
    }
    write_atomic(path, &bytes)
}

pub fn save_dataset(path: &Path, records: &[DatasetRecord]) -> Result<(), CliError> {
    let mut bytes = Vec::new();
    write_dataset(&mut bytes, records).expect("writing to memory");
    write_atomic(path, &bytes)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
}

/// File name for a conversation's artifact: characters outside
/// `[A-Za-z0-9._-]` become `_`.
pub fn artifact_file_name(conversation_id: &str) -> String {
    let stem: String = conversation_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{stem}.json")
}

pub fn say<W: Write>(out: &mut W, text: impl AsRef<str>) -> Result<(), CliError> {
    writeln!(out, "{}", text.as_ref()).map_err(|e| CliError::Io {
        path: "<stdout>".into(),
        source: e,
    })
}
