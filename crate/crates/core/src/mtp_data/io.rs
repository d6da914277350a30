//! Line-delimited dataset files: one JSON conversation document per line.

use std::io::{BufRead, Write};

use serde_json::Value;
use thiserror::Error;

use super::types::DatasetRecord;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: unknown fields {fields:?}")]
    UnknownFields { line: usize, fields: Vec<String> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Unknown fields are reported as warnings and ignored.
    #[default]
    Lenient,
    /// Unknown fields fail the load.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadWarning {
    pub line: usize,
    pub message: String,
}

const RECORD_FIELDS: &[&str] = &[
    "id",
    "scene_tag",
    "season",
    "episode",
    "duration_s",
    "utterances",
    "annotations",
    "consensus",
];
const UTTERANCE_FIELDS: &[&str] = &[
    "ordinal",
    "transcript",
    "speaker",
    "start_s",
    "end_s",
    "visual_description",
    "frame_ref",
];
const ANNOTATION_FIELDS: &[&str] = &[
    "annotator_id",
    "conversation_id",
    "turning_points",
    "no_tp_explanation",
];
const CONSENSUS_FIELDS: &[&str] = &["turning_points"];
const TP_FIELDS: &[&str] = &[
    "location_s",
    "cause",
    "pre_feelings",
    "post_feelings",
    "pre_dbp",
    "post_dbp",
    "explanation",
    "type_tag",
];
const FEELING_FIELDS: &[&str] = &["label", "ts"];
const STATE_FIELDS: &[&str] = &["description", "evidence_ts"];

fn check_object(value: &Value, allowed: &[&str], path: &str, out: &mut Vec<String>) {
    if let Value::Object(map) = value {
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                out.push(format!("{path}.{key}"));
            }
        }
    }
}

fn check_array(
    value: Option<&Value>,
    path: &str,
    out: &mut Vec<String>,
    mut each: impl FnMut(&Value, &str, &mut Vec<String>),
) {
    if let Some(Value::Array(items)) = value {
        for (i, item) in items.iter().enumerate() {
            each(item, &format!("{path}[{i}]"), out);
        }
    }
}

fn check_turning_point(tp: &Value, path: &str, out: &mut Vec<String>) {
    check_object(tp, TP_FIELDS, path, out);
    for key in ["pre_feelings", "post_feelings"] {
        check_array(tp.get(key), &format!("{path}.{key}"), out, |v, p, o| {
            check_object(v, FEELING_FIELDS, p, o)
        });
    }
    for key in ["pre_dbp", "post_dbp"] {
        check_array(tp.get(key), &format!("{path}.{key}"), out, |v, p, o| {
            check_object(v, STATE_FIELDS, p, o)
        });
    }
}

/// Dotted paths of every field not in the dataset schema.
pub fn unknown_fields(doc: &Value) -> Vec<String> {
    let mut out = Vec::new();
    check_object(doc, RECORD_FIELDS, "", &mut out);
    check_array(doc.get("utterances"), "utterances", &mut out, |v, p, o| {
        check_object(v, UTTERANCE_FIELDS, p, o)
    });
    check_array(
        doc.get("annotations"),
        "annotations",
        &mut out,
        |v, p, o| {
            check_object(v, ANNOTATION_FIELDS, p, o);
            check_array(
                v.get("turning_points"),
                &format!("{p}.turning_points"),
                o,
                check_turning_point,
            );
        },
    );
    if let Some(consensus) = doc.get("consensus") {
        check_object(consensus, CONSENSUS_FIELDS, "consensus", &mut out);
        check_array(
            consensus.get("turning_points"),
            "consensus.turning_points",
            &mut out,
            check_turning_point,
        );
    }
    for path in &mut out {
        if let Some(stripped) = path.strip_prefix('.') {
            *path = stripped.to_string();
        }
    }
    out
}

pub fn parse_record(
    line: &str,
    line_no: usize,
    strictness: Strictness,
) -> Result<(DatasetRecord, Vec<LoadWarning>), DatasetError> {
    let doc: Value = serde_json::from_str(line).map_err(|source| DatasetError::Json {
        line: line_no,
        source,
    })?;
    let unknown = unknown_fields(&doc);
    let mut warnings = Vec::new();
    if !unknown.is_empty() {
        match strictness {
            Strictness::Strict => {
                return Err(DatasetError::UnknownFields {
                    line: line_no,
                    fields: unknown,
                })
            }
            Strictness::Lenient => warnings.push(LoadWarning {
                line: line_no,
                message: format!("ignoring unknown fields {unknown:?}"),
            }),
        }
    }
    let mut record: DatasetRecord =
        serde_json::from_value(doc).map_err(|source| DatasetError::Json {
            line: line_no,
            source,
        })?;
    for annotation in &mut record.annotations {
        if annotation.conversation_id.is_empty() {
            annotation.conversation_id = record.conversation.id.clone();
        }
    }
    Ok((record, warnings))
}

/// Read every non-blank line as a dataset record.
pub fn read_dataset<R: BufRead>(
    reader: R,
    strictness: Strictness,
) -> Result<(Vec<DatasetRecord>, Vec<LoadWarning>), DatasetError> {
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (record, w) = parse_record(&line, idx + 1, strictness)?;
        records.push(record);
        warnings.extend(w);
    }
    Ok((records, warnings))
}

pub fn write_dataset<W: Write>(mut writer: W, records: &[DatasetRecord]) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
