use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{ClassificationMetrics, DetectionMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMetrics {
    pub classification: ClassificationMetrics,
    pub detection: DetectionMetrics,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub csv: String,
    pub text: String,
}

pub const AUC_FOOTER: &str =
    "AUC is the Mann-Whitney rank statistic; with binary predictions it equals (TPR + TNR) / 2.";

const HEADERS: [&str; 7] = [
    "Precision",
    "Recall",
    "F1",
    "AUC",
    "Precision",
    "Recall",
    "F1",
];

fn cells(m: &RunMetrics) -> [String; 7] {
    let c = &m.classification;
    let d = &m.detection;
    [
        c.precision,
        c.recall,
        c.f1,
        c.auc,
        d.precision,
        d.recall,
        d.f1,
    ]
    .map(|v| format!("{v:.2}"))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Methods become rows in the given order; values are rounded to two decimals.
pub fn render_report(runs: &[(String, RunMetrics)]) -> Report {
    let mut csv = String::from(
        "method,cls_precision,cls_recall,cls_f1,cls_auc,det_precision,det_recall,det_f1\n",
    );
    for (name, metrics) in runs {
        let _ = writeln!(csv, "{},{}", csv_field(name), cells(metrics).join(","));
    }

    let name_w = runs
        .iter()
        .map(|(n, _)| n.chars().count())
        .chain(["Method".len()])
        .max()
        .unwrap_or(6);
    let col_w = 9;
    let cls_w = 4 * (col_w + 1) - 1;
    let det_w = 3 * (col_w + 1) - 1;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:name_w$} | {:cls_w$} | {:det_w$}",
        "", "Turning point classification", "Turning point detection"
    );
    let header: Vec<String> = HEADERS.iter().map(|h| format!("{h:<col_w$}")).collect();
    let _ = writeln!(
        text,
        "{:name_w$} | {} | {}",
        "Method",
        header[..4].join(" "),
        header[4..].join(" ")
    );
    let _ = writeln!(
        text,
        "{}-+-{}-+-{}",
        "-".repeat(name_w),
        "-".repeat(cls_w),
        "-".repeat(det_w)
    );
    for (name, metrics) in runs {
        let row: Vec<String> = cells(metrics)
            .iter()
            .map(|c| format!("{c:<col_w$}"))
            .collect();
        let line = format!(
            "{:name_w$} | {} | {}",
            name,
            row[..4].join(" "),
            row[4..].join(" ")
        );
        let _ = writeln!(text, "{line}");
    }
    let _ = writeln!(text);
    let _ = writeln!(text, "{AUC_FOOTER}");
    let text = text
        .lines()
        .map(|l| format!("{}\n", l.trim_end()))
        .collect();
    Report { csv, text }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(c: [f64; 4], d: [f64; 3]) -> RunMetrics {
        let mut m = RunMetrics::default();
        m.classification.precision = c[0];
        m.classification.recall = c[1];
        m.classification.f1 = c[2];
        m.classification.auc = c[3];
        m.detection.precision = d[0];
        m.detection.recall = d[1];
        m.detection.f1 = d[2];
        m
    }

    #[test]
    fn single_row_and_rounding() {
        let report = render_report(&[(
            "run".into(),
            metrics([0.875, 0.5, 1.0 / 3.0, 0.5], [0.6, 0.625, 0.0]),
        )]);
        let lines: Vec<&str> = report.csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1], "run,0.88,0.50,0.33,0.50,0.60,0.62,0.00");
        assert_eq!(
            report.text.lines().filter(|l| l.starts_with("run")).count(),
            1
        );
    }

    #[test]
    fn names_with_commas_are_quoted() {
        let report = render_report(&[("a, \"b\"".into(), RunMetrics::default())]);
        assert!(report
            .csv
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("\"a, \"\"b\"\"\","));
    }

    #[test]
    fn byte_stable() {
        let runs = vec![("x".to_string(), metrics([0.1; 4], [0.2; 3]))];
        assert_eq!(render_report(&runs), render_report(&runs));
    }
}
