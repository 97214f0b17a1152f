//! The consolidated human-readable summary and the attribute chart.

use std::fmt::Write as _;

use collab_core::eval::{CellOutcome, ExperimentReport, Protocol};
use collab_core::explain::{AttributeRanking, ExplanationReport};
use collab_core::stats::CorrelationEntry;
use collab_core::synth::{CancerType, Cohort};
use collab_core::RunMeta;

use crate::config::PipelineConfig;

/// Attributes shown in the summary table and the chart.
pub const CHART_TOP: usize = 15;

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}"))
        .unwrap_or_else(|| "—".into())
}

pub fn summary_markdown(
    config: &PipelineConfig,
    cohort: &Cohort,
    experiment: &ExperimentReport,
    explanation: &ExplanationReport,
    correlations: &[CorrelationEntry],
) -> String {
    let mut s = String::new();
    let meta = &experiment.meta;
    let _ = writeln!(s, "# Collaboration-network survival analysis\n");
    let _ = writeln!(s, "- config hash: `{}`", meta.config_hash);
    let _ = writeln!(s, "- tool version: {}", meta.tool_version);
    let _ = writeln!(
        s,
        "- seeds: synth {}, eval {}, explain {}",
        config.synth.seed, config.eval.seed, config.explain.seed
    );
    let _ = writeln!(
        s,
        "- observation window: days {} to {} (gap to day {} excluded)",
        config.windows.observation_start, config.windows.observation_end, config.windows.gap_end
    );

    let _ = writeln!(s, "\n## Cohort\n");
    let _ = writeln!(s, "| cancer type | patients | survived | deceased |");
    let _ = writeln!(s, "|---|---:|---:|---:|");
    for c in CancerType::ALL {
        let n = cohort.patients_of(c).count();
        if n == 0 {
            continue;
        }
        let survived = cohort.patients_of(c).filter(|p| p.survived).count();
        let _ = writeln!(s, "| {c} | {n} | {survived} | {} |", n - survived);
    }

    let protocol = match experiment.protocol {
        Protocol::CrossValidation { k } => format!("{k}-fold cross-validation"),
        Protocol::Holdout { test_fraction } => format!("hold-out ({test_fraction} test)"),
    };
    let _ = writeln!(s, "\n## Prediction accuracy ({protocol})\n");
    let mut models = Vec::new();
    let mut cancers = Vec::new();
    for c in &experiment.cells {
        if !models.contains(&c.model) {
            models.push(c.model);
        }
        if !cancers.contains(&c.cancer_type) {
            cancers.push(c.cancer_type);
        }
    }
    let _ = write!(s, "| cancer type |");
    for m in &models {
        let _ = write!(s, " {m} |");
    }
    let _ = write!(s, "\n|---|");
    for _ in &models {
        let _ = write!(s, "---:|");
    }
    s.push('\n');
    for c in &cancers {
        let _ = write!(s, "| {c} |");
        for m in &models {
            let cell = match experiment.cell(*c, *m).map(|x| &x.outcome) {
                Some(CellOutcome::Ok {
                    mean_accuracy,
                    sd_accuracy,
                    ..
                }) => format!("{mean_accuracy:.3} ± {sd_accuracy:.3}"),
                Some(CellOutcome::Failed { .. }) => "failed".into(),
                None => "—".into(),
            };
            let _ = write!(s, " {cell} |");
        }
        s.push('\n');
    }
    for c in &experiment.cells {
        if let CellOutcome::Failed { error } = &c.outcome {
            let _ = writeln!(s, "\n{} / {} failed: {error}", c.cancer_type, c.model);
        }
    }
    let _ = writeln!(
        s,
        "\nMean ± standard deviation of fold accuracy. Chart: `accuracy.svg` (data: `accuracy.csv`)."
    );

    let _ = writeln!(s, "\n## Attribute importance\n");
    let _ = writeln!(
        s,
        "Mean |SHAP| over {} patients of the attribute-only model; baseline {}.\n",
        explanation.ranking.n_instances, explanation.baseline
    );
    let _ = writeln!(s, "| rank | attribute | mean \\|SHAP\\| |");
    let _ = writeln!(s, "|---:|---|---:|");
    for e in explanation.ranking.entries.iter().take(CHART_TOP) {
        let _ = writeln!(s, "| {} | {} | {:.5} |", e.rank, e.name, e.mean_abs);
    }
    let _ = writeln!(
        s,
        "\nChart: `attributes.svg` (data: `attributes.csv`, all attributes)."
    );

    let _ = writeln!(s, "\n## Confounders\n");
    let _ = writeln!(
        s,
        "Correlation of each variable with survival (gender: female = 1; stage: III = 1; insurance: private = 1).\n"
    );
    let _ = writeln!(
        s,
        "| group | variable | n | Pearson r | p | Spearman ρ | p | note |"
    );
    let _ = writeln!(s, "|---|---|---:|---:|---:|---:|---:|---|");
    for e in correlations {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} | {} |",
            e.group,
            e.variable,
            e.n,
            fmt_opt(e.pearson_r, 3),
            fmt_opt(e.pearson_p, 4),
            fmt_opt(e.spearman_rho, 3),
            fmt_opt(e.spearman_p, 4),
            e.error.as_deref().unwrap_or("")
        );
    }
    s
}

fn escape_xml(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Horizontal bar chart of the `top` highest-ranked attributes.
pub fn attributes_svg(ranking: &AttributeRanking, meta: &RunMeta, top: usize) -> String {
    let entries: Vec<_> = ranking.entries.iter().take(top).collect();
    let max = entries.iter().map(|e| e.mean_abs).fold(0.0_f64, f64::max);
    let (label_w, bar_w, row_h, top_pad) = (300.0, 360.0, 20.0, 30.0);
    let height = top_pad + row_h * entries.len() as f64 + 20.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" font-family="sans-serif" font-size="11">"#,
        label_w + bar_w + 90.0
    );
    let _ = writeln!(
        s,
        "<!-- config_hash={} seed={} tool_version={} -->",
        meta.config_hash, meta.seed, meta.tool_version
    );
    let _ = writeln!(
        s,
        r#"<text x="{label_w}" y="18" font-weight="bold">mean |SHAP| ({} patients)</text>"#,
        ranking.n_instances
    );
    for (i, e) in entries.iter().enumerate() {
        let y = top_pad + row_h * i as f64;
        let w = if max > 0.0 {
            bar_w * e.mean_abs / max
        } else {
            0.0
        };
        let name = escape_xml(&e.name);
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{}" text-anchor="end">{name}</text><rect x="{label_w}" y="{}" width="{w}" height="{}" fill="#4477aa"><title>{name}: {}</title></rect><text x="{}" y="{}">{:.4}</text>"##,
            label_w - 6.0,
            y + 13.0,
            y + 3.0,
            row_h - 6.0,
            e.mean_abs,
            label_w + w + 4.0,
            y + 13.0,
            e.mean_abs
        );
    }
    s.push_str("</svg>\n");
    s
}
