use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::mtp_data::{EpisodeRef, Timestamp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneBoundary {
    #[serde(flatten)]
    pub source: EpisodeRef,
    pub scene_tag: String,
    pub start_s: Timestamp,
    pub end_s: Timestamp,
}

impl SceneBoundary {
    fn label(&self) -> String {
        format!(
            "{} [{}, {}]",
            self.scene_tag,
            self.start_s.to_clock(),
            self.end_s.to_clock()
        )
    }
}

/// An external command that produces `output`; never run in-process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipJob {
    pub input: PathBuf,
    pub start_s: Timestamp,
    pub end_s: Timestamp,
    pub output: PathBuf,
}

impl ClipJob {
    pub fn ffmpeg_args(&self) -> Vec<String> {
        vec![
            "-y".into(),
            "-loglevel".into(),
            "error".into(),
            "-i".into(),
            self.input.display().to_string(),
            "-ss".into(),
            self.start_s.to_string(),
            "-to".into(),
            self.end_s.to_string(),
            "-c".into(),
            "copy".into(),
            self.output.display().to_string(),
        ]
    }
}

/// Lowercase ASCII alphanumerics with single dashes between runs.
pub fn slug(text: &str) -> String {
    let mut out = String::new();
    for c in text.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.is_empty() && !out.ends_with('-') {
            out.push('-');
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    if out.is_empty() {
        out.push_str("scene");
    }
    out
}

/// One job per boundary with output `sXXeYY_<slug>.mp4` under `out_dir`.
pub fn clip_manifest(
    media: &Path,
    boundaries: &[SceneBoundary],
    out_dir: &Path,
) -> Result<Vec<ClipJob>, PreprocessError> {
    for b in boundaries {
        if b.start_s >= b.end_s {
            return Err(PreprocessError::Input(format!(
                "scene {} does not end after it starts",
                b.label()
            )));
        }
    }
    let mut order: Vec<&SceneBoundary> = boundaries.iter().collect();
    order.sort_by(|a, b| {
        (a.source, a.start_s.seconds())
            .partial_cmp(&(b.source, b.start_s.seconds()))
            .expect("timestamps are finite")
    });
    for pair in order.windows(2) {
        if pair[0].source == pair[1].source && pair[1].start_s < pair[0].end_s {
            return Err(PreprocessError::Overlap {
                first: pair[0].label(),
                second: pair[1].label(),
            });
        }
    }

    let mut jobs: Vec<ClipJob> = Vec::with_capacity(boundaries.len());
    for b in boundaries {
        let output = out_dir.join(format!(
            "s{:02}e{:02}_{}.mp4",
            b.source.season,
            b.source.episode,
            slug(&b.scene_tag)
        ));
        if jobs.iter().any(|j| j.output == output) {
            return Err(PreprocessError::Input(format!(
                "two scenes map to {}; scene tags must be distinct",
                output.display()
            )));
        }
        jobs.push(ClipJob {
            input: media.to_path_buf(),
            start_s: b.start_s,
            end_s: b.end_s,
            output,
        });
    }
    Ok(jobs)
}

/// Runs `program` once per argument list, creating parent directories first.
pub fn run_jobs(program: &str, jobs: &[(PathBuf, Vec<String>)]) -> Result<(), PreprocessError> {
    for (output, args) in jobs {
        if let Some(parent) = output.parent() {
            std::fs::create_dir_all(parent).map_err(|source| PreprocessError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        let status = Command::new(program)
            .args(args)
            .status()
            .map_err(|source| PreprocessError::Io {
                path: PathBuf::from(program),
                source,
            })?;
        if !status.success() {
            return Err(PreprocessError::Tool {
                program: program.to_string(),
                output: output.clone(),
                status: status.to_string(),
            });
        }
    }
    Ok(())
}
