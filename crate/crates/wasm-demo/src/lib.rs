//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export takes and returns plain values or JSON strings so the page
//! needs no bundler. The `*_json` functions hold the logic and are what the
//! native tests exercise.

use mtp_core::evaluator::{
    detection_metrics, match_points, roc_auc, ConversationPoints, Matching, PointMatches,
};
use mtp_core::mtp_data::Timestamp;
use mtp_core::reasoner::parse_conclusion;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[derive(Deserialize)]
struct WindowInput {
    preds: Vec<f64>,
    gts: Vec<f64>,
    delta_t: f64,
    #[serde(default)]
    matching: Matching,
}

#[derive(Serialize)]
struct WindowOutput {
    matches: PointMatches,
    precision: f64,
    recall: f64,
    f1: f64,
}

fn stamps(values: &[f64]) -> Result<Vec<Timestamp>, String> {
    values
        .iter()
        .map(|v| Timestamp::new(*v).map_err(|e| e.to_string()))
        .collect()
}

/// `{"preds": [..], "gts": [..], "delta_t": 20, "matching": "exists"}` to
/// per-point matches and precision/recall/F1.
pub fn explore_window_json(input: &str) -> Result<String, String> {
    let input: WindowInput = serde_json::from_str(input).map_err(|e| e.to_string())?;
    let points = ConversationPoints {
        preds: stamps(&input.preds)?,
        gts: stamps(&input.gts)?,
    };
    let metrics = detection_metrics(std::slice::from_ref(&points), input.delta_t, input.matching)
        .map_err(|e| e.to_string())?;
    let out = WindowOutput {
        matches: match_points(&points, input.delta_t, input.matching),
        precision: metrics.precision,
        recall: metrics.recall,
        f1: metrics.f1,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

pub fn auc_of(labels: &[u8], scores: &[f64]) -> Result<f64, String> {
    if labels.len() != scores.len() {
        return Err(format!(
            "{} labels but {} scores",
            labels.len(),
            scores.len()
        ));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(format!("score {s} is not finite"));
    }
    let labels: Vec<bool> = labels.iter().map(|l| *l != 0).collect();
    Ok(roc_auc(&labels, scores))
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
enum ParseOutput {
    Ordinals {
        ordinals: Vec<u32>,
        warnings: Vec<String>,
    },
    Error {
        message: String,
    },
}

pub fn parse_conclusion_json(text: &str, m: usize) -> String {
    let out = match parse_conclusion(text, m) {
        Ok(p) => ParseOutput::Ordinals {
            ordinals: p.ordinals,
            warnings: p.warnings,
        },
        Err(e) => ParseOutput::Error {
            message: e.to_string(),
        },
    };
    serde_json::to_string(&out).expect("parse output serializes")
}

#[wasm_bindgen(js_name = exploreWindow)]
pub fn explore_window(input: &str) -> Result<String, JsError> {
    explore_window_json(input).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn auc(labels: &[u8], scores: &[f64]) -> Result<f64, JsError> {
    auc_of(labels, scores).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = parseConclusion)]
pub fn parse_conclusion_js(text: &str, m: usize) -> String {
    parse_conclusion_json(text, m)
}
