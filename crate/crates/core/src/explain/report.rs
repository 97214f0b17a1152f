//! Explanation files: the ranking table (CSV) and per-instance attributions
//! (JSON).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AttributeRanking, ShapResult};
use crate::error::{Error, Result};
use crate::eval::{provenance_comment, RunMeta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceShap {
    pub patient_id: String,
    pub result: ShapResult,
}

/// Everything one explanation run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub meta: RunMeta,
    /// Human-readable statement of the reference input.
    pub baseline: String,
    pub ranking: AttributeRanking,
    pub instances: Vec<InstanceShap>,
}

pub fn write_ranking_csv(ranking: &AttributeRanking, meta: &RunMeta, path: &Path) -> Result<()> {
    let mut buf = provenance_comment(meta).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record([
            "rank",
            "feature_index",
            "attribute",
            "mean_abs_shap",
            "min",
            "max",
        ])
        .map_err(|e| Error::io(path, e.into()))?;
        for e in &ranking.entries {
            w.write_record([
                e.rank.to_string(),
                e.feature.to_string(),
                e.name.clone(),
                e.mean_abs.to_string(),
                e.min.to_string(),
                e.max.to_string(),
            ])
            .map_err(|e| Error::io(path, e.into()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn write_explanation_json(report: &ExplanationReport, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report).expect("explanation serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::{rank_attributes, Estimator};

    #[test]
    fn ranking_csv_has_provenance_and_one_row_per_feature() {
        let r = ShapResult {
            estimator: Estimator::Exact,
            baseline: vec![0.0; 2],
            features: vec![3, 59],
            values: vec![0.1, -0.4],
            std_errors: vec![0.0; 2],
            base_value: 0.5,
            output: 0.2,
        };
        let ranking = rank_attributes(std::slice::from_ref(&r)).unwrap();
        let meta = RunMeta {
            seed: 7,
            config_hash: "abc".into(),
            tool_version: "0.1.0".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ranking.csv");
        write_ranking_csv(&ranking, &meta, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# config_hash=abc seed=7 tool_version=0.1.0");
        assert!(lines[2].starts_with("1,59,hcp.specialty=General Practice,0.4,"));
        assert_eq!(lines.len(), 4);

        let report = ExplanationReport {
            meta,
            baseline: "all-zeros".into(),
            ranking,
            instances: vec![InstanceShap {
                patient_id: "P1".into(),
                result: r,
            }],
        };
        let jp = dir.path().join("shap.json");
        write_explanation_json(&report, &jp).unwrap();
        let back: ExplanationReport =
            serde_json::from_str(&fs::read_to_string(&jp).unwrap()).unwrap();
        assert_eq!(back, report);
    }
}
