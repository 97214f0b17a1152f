//! Report files: a comparison table (CSV), full per-fold detail (JSON) and a
//! grouped bar chart of mean accuracies (SVG).

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::compare::{CellOutcome, ExperimentReport};
use crate::error::{Error, Result};
use crate::provenance::provenance_comment;

pub fn write_report_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut buf = provenance_comment(&report.meta).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record([
            "cancer_type",
            "model",
            "status",
            "n_survived",
            "n_deceased",
            "correct_survived",
            "correct_deceased",
            "accuracy",
            "mean_fold_accuracy",
            "sd_fold_accuracy",
            "error",
        ])
        .map_err(|e| Error::io(path, e.into()))?;
        for c in &report.cells {
            let row: Vec<String> = match &c.outcome {
                CellOutcome::Ok {
                    total,
                    mean_accuracy,
                    sd_accuracy,
                    ..
                } => vec![
                    c.cancer_type.to_string(),
                    c.model.to_string(),
                    "ok".into(),
                    total.n_survived.to_string(),
                    total.n_deceased.to_string(),
                    total.correct_survived.to_string(),
                    total.correct_deceased.to_string(),
                    format!("{:.4}", total.accuracy),
                    format!("{mean_accuracy:.4}"),
                    format!("{sd_accuracy:.4}"),
                    String::new(),
                ],
                CellOutcome::Failed { error } => {
                    let mut r = vec![
                        c.cancer_type.to_string(),
                        c.model.to_string(),
                        "failed".into(),
                    ];
                    r.extend(std::iter::repeat_n(String::new(), 7));
                    r.push(error.clone());
                    r
                }
            };
            w.write_record(&row)
                .map_err(|e| Error::io(path, e.into()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn write_report_json(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    f.write_all(text.as_bytes())
        .and_then(|_| f.write_all(b"\n"))
        .map_err(|e| Error::io(path, e))
}

/// Grouped bar chart: one group per cancer type, one bar per model.
pub fn write_report_svg(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut cancers = Vec::new();
    let mut models = Vec::new();
    for c in &report.cells {
        if !cancers.contains(&c.cancer_type) {
            cancers.push(c.cancer_type);
        }
        if !models.contains(&c.model) {
            models.push(c.model);
        }
    }
    const COLORS: [&str; 6] = [
        "#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377",
    ];
    let (bar, gap, left, top, height) = (28.0, 30.0, 50.0, 30.0, 200.0);
    let group = bar * models.len() as f64 + gap;
    let width = left + group * cancers.len() as f64 + 180.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{}" font-family="sans-serif" font-size="11">"#,
        top + height + 40.0
    );
    let _ = writeln!(
        s,
        "<!-- config_hash={} seed={} tool_version={} -->",
        report.meta.config_hash, report.meta.seed, report.meta.tool_version
    );
    for tick in 0..=5 {
        let v = tick as f64 / 5.0;
        let y = top + height * (1.0 - v);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{v:.1}</text>"##,
            width - 180.0,
            left - 4.0,
            y + 4.0
        );
    }
    for (ci, cancer) in cancers.iter().enumerate() {
        let x0 = left + gap / 2.0 + group * ci as f64;
        for (mi, model) in models.iter().enumerate() {
            if let Some(acc) = report.mean_accuracy(*cancer, *model) {
                let h = height * acc;
                let _ = writeln!(
                    s,
                    r#"<rect x="{}" y="{}" width="{}" height="{h}" fill="{}"><title>{cancer} {model}: {acc:.3}</title></rect>"#,
                    x0 + bar * mi as f64,
                    top + height - h,
                    bar - 2.0,
                    COLORS[mi % COLORS.len()]
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{cancer}</text>"#,
            x0 + bar * models.len() as f64 / 2.0,
            top + height + 16.0
        );
    }
    for (mi, model) in models.iter().enumerate() {
        let y = top + 14.0 * mi as f64;
        let x = width - 170.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{model}</text>"#,
            y,
            COLORS[mi % COLORS.len()],
            x + 14.0,
            y + 9.0
        );
    }
    s.push_str("</svg>\n");
    fs::write(path, s).map_err(|e| Error::io(path, e))
}
