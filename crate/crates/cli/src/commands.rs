//! The pipeline stages. Each reads its inputs from the dataset or output
//! directory, writes only under its own output subdirectory, and returns the
//! files it wrote.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use collab_core::eval::{
    build_cohort_graphs, prepare_datasets, run_comparison, write_report_csv, write_report_json,
    write_report_svg, ExperimentReport, PatientExample,
};
use collab_core::explain::{
    explain_cohort, write_explanation_json, write_ranking_csv, ExplanationReport,
};
use collab_core::graph::{
    read_graph_dump, simplify_to_hcp, simplify_to_notes, write_graph_dump, write_simplified_dump,
    TimeWindows,
};
use collab_core::models::{train, Instance, Model, ModelKind};
use collab_core::nn::{read_checkpoint, write_checkpoint};
use collab_core::stats::{confounder_report, write_correlations_csv, CorrelationEntry};
use collab_core::synth::{generate_cohort, read_dataset, write_dataset, CancerType, Cohort};
use collab_core::RunMeta;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::report;

pub const GRAPHS_DIR: &str = "graphs";
pub const CHECKPOINTS_DIR: &str = "checkpoints";
pub const COMPARE_DIR: &str = "compare";
pub const EXPLAIN_DIR: &str = "explain";
pub const CORRELATE_DIR: &str = "correlate";
pub const REPORT_DIR: &str = "report";

/// Resolved configuration plus run-time settings shared by all commands.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: PipelineConfig,
    /// Worker threads for parallel stages; results do not depend on it.
    pub jobs: usize,
}

/// Which patients a model is trained on or explained over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    All,
    Cancer(CancerType),
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::All => "all",
            Scope::Cancer(c) => c.as_str(),
        }
    }

    fn includes(self, cancer: CancerType) -> bool {
        match self {
            Scope::All => true,
            Scope::Cancer(c) => c == cancer,
        }
    }
}

impl std::str::FromStr for Scope {
    type Err = collab_core::Error;

    fn from_str(s: &str) -> collab_core::Result<Self> {
        if s == "all" {
            Ok(Scope::All)
        } else {
            s.parse().map(Scope::Cancer)
        }
    }
}

/// Lists the graph dumps written by `build` and the settings they reflect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphIndex {
    pub provenance: RunMeta,
    pub windows: TimeWindows,
    pub patients: Vec<String>,
}

/// The `correlate` output in machine-readable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub meta: RunMeta,
    pub entries: Vec<CorrelationEntry>,
}

pub fn checkpoint_path(out: &Path, kind: ModelKind, scope: Scope) -> PathBuf {
    out.join(CHECKPOINTS_DIR)
        .join(format!("{}-{}.json", kind.as_str(), scope.as_str()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Replaces a command's output directory so no stale file survives a rerun.
fn fresh_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        fs::remove_dir_all(dir).with_context(|| format!("clearing {}", dir.display()))?;
    }
    create_dir(dir)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file))
        .with_context(|| format!("parsing {}", path.display()))
}

/// Fails with a "run X first" hint when an upstream artifact is missing.
fn require(path: &Path, hint: &str) -> Result<()> {
    if !path.exists() {
        bail!("missing {}; run `{hint}` first", path.display());
    }
    Ok(())
}

/// Fails when an upstream artifact was produced under another configuration.
fn require_same_config(
    meta: &RunMeta,
    config: &PipelineConfig,
    what: &Path,
    hint: &str,
) -> Result<()> {
    let expected = config.hash();
    if meta.config_hash != expected {
        bail!(
            "{} was produced under configuration {} but the current one is {}; rerun `{hint}`",
            what.display(),
            meta.config_hash,
            expected
        );
    }
    Ok(())
}

fn dump_file_name(patient_id: &str) -> Result<String> {
    if patient_id.is_empty()
        || !patient_id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
    {
        bail!("patient id {patient_id:?} cannot be used as a file name");
    }
    Ok(format!("{patient_id}.jsonl"))
}

impl Context {
    pub fn out(&self) -> &Path {
        &self.config.out_dir
    }

    fn load_cohort(&self) -> Result<Cohort> {
        let dir = self.config.dataset_dir();
        require(&dir.join("manifest.json"), "collab synth")?;
        Ok(read_dataset(&dir)?)
    }

    /// Per-cancer examples from the dataset and the bipartite dumps written
    /// by `build`; every graph passes the leakage guard.
    fn load_examples(&self) -> Result<BTreeMap<CancerType, Vec<PatientExample>>> {
        let cohort = self.load_cohort()?;
        let graphs_dir = self.out().join(GRAPHS_DIR);
        let index_path = graphs_dir.join("index.json");
        require(&index_path, "collab build")?;
        let index: GraphIndex = read_json(&index_path)?;
        if index.windows != self.config.windows {
            bail!(
                "{} was built with different time windows; rerun `collab build`",
                index_path.display()
            );
        }
        let ids: Vec<&str> = cohort
            .patients
            .iter()
            .map(|p| p.patient_id.as_str())
            .collect();
        if index.patients != ids {
            bail!(
                "{} lists other patients than the dataset; rerun `collab build`",
                index_path.display()
            );
        }
        let mut graphs = Vec::with_capacity(ids.len());
        for id in ids {
            let path = graphs_dir.join("bipartite").join(dump_file_name(id)?);
            let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
            graphs.push(read_graph_dump(BufReader::new(file), &path)?);
        }
        Ok(prepare_datasets(
            &cohort.patients,
            &graphs,
            &self.config.windows,
        )?)
    }

    pub fn synth(&self) -> Result<Vec<PathBuf>> {
        let cfg = &self.config;
        let cohort = generate_cohort(&cfg.synth)?;
        let dir = cfg.dataset_dir();
        write_dataset(
            &cohort,
            Some(&cfg.synth),
            Some(&cfg.meta(cfg.synth.seed)),
            &dir,
        )?;
        Ok([
            "manifest.json",
            "patients.jsonl",
            "hcps.jsonl",
            "notes.jsonl",
            "events.jsonl",
        ]
        .iter()
        .map(|f| dir.join(f))
        .collect())
    }

    pub fn build(&self) -> Result<Vec<PathBuf>> {
        let cfg = &self.config;
        let cohort = self.load_cohort()?;
        let graphs = build_cohort_graphs(&cohort, &cfg.windows)?;
        let meta = cfg.meta(cfg.synth.seed);
        let root = self.out().join(GRAPHS_DIR);
        fresh_dir(&root)?;
        for sub in ["bipartite", "all_hcp", "all_note"] {
            create_dir(&root.join(sub))?;
        }
        for g in &graphs {
            let name = dump_file_name(&g.patient_id)?;
            let write = |sub: &str, f: &dyn Fn(&mut BufWriter<File>) -> std::io::Result<()>| {
                let path = root.join(sub).join(&name);
                let file =
                    File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                let mut w = BufWriter::new(file);
                f(&mut w)
                    .and_then(|_| w.flush())
                    .with_context(|| format!("writing {}", path.display()))
            };
            write("bipartite", &|w| write_graph_dump(g, Some(&meta), w))?;
            write("all_hcp", &|w| {
                write_simplified_dump(&simplify_to_hcp(g), Some(&meta), w)
            })?;
            write("all_note", &|w| {
                write_simplified_dump(&simplify_to_notes(g), Some(&meta), w)
            })?;
        }
        let index_path = root.join("index.json");
        write_json(
            &GraphIndex {
                provenance: meta,
                windows: cfg.windows,
                patients: graphs.iter().map(|g| g.patient_id.clone()).collect(),
            },
            &index_path,
        )?;
        Ok(vec![index_path])
    }

    pub fn train(&self, kind: ModelKind, scope: Scope) -> Result<Vec<PathBuf>> {
        let cfg = &self.config;
        let datasets = self.load_examples()?;
        let examples: Vec<&PatientExample> = datasets
            .iter()
            .filter(|(c, _)| scope.includes(**c))
            .flat_map(|(_, v)| v)
            .collect();
        if examples.is_empty() {
            bail!("no patients of scope `{}` in the dataset", scope.as_str());
        }
        let instances: Vec<Instance<'_>> = examples.iter().map(|e| e.instance(kind)).collect();
        let labels: Vec<bool> = examples.iter().map(|e| e.survived).collect();
        let seed = cfg.eval.seed;
        let trained = train(kind, &instances, &labels, &cfg.model, seed)?;
        let ck = trained.model.to_checkpoint(serde_json::json!({
            "scope": scope.as_str(),
            "provenance": cfg.meta(seed),
            "train": cfg.model,
            "n_patients": examples.len(),
            "best_epoch": trained.history.best_epoch,
            "epochs_run": trained.history.train_loss.len(),
        }));
        create_dir(&self.out().join(CHECKPOINTS_DIR))?;
        let path = checkpoint_path(self.out(), kind, scope);
        write_checkpoint(&path, &ck)?;
        Ok(vec![path])
    }

    pub fn compare(&self) -> Result<Vec<PathBuf>> {
        let cfg = &self.config;
        let datasets = self.load_examples()?;
        let report = run_comparison(
            &datasets,
            &cfg.eval_config(),
            cfg.meta(cfg.eval.seed),
            self.jobs,
        )?;
        let dir = self.out().join(COMPARE_DIR);
        fresh_dir(&dir)?;
        let paths = [
            dir.join("report.csv"),
            dir.join("report.json"),
            dir.join("report.svg"),
        ];
        write_report_csv(&report, &paths[0])?;
        write_report_json(&report, &paths[1])?;
        write_report_svg(&report, &paths[2])?;
        Ok(paths.to_vec())
    }

    /// Attributions under an attribute-only checkpoint, over the patients of
    /// the scope it was trained on.
    pub fn explain(&self, checkpoint: Option<&Path>) -> Result<Vec<PathBuf>> {
        let cfg = &self.config;
        let default = checkpoint_path(self.out(), ModelKind::AttrOnly, Scope::All);
        let path = checkpoint.unwrap_or(&default);
        require(path, "collab train --model attr-only --cancer all")?;
        let ck = read_checkpoint(path)?;
        let model = Model::from_checkpoint(&ck)?;
        if model.kind() != ModelKind::AttrOnly {
            bail!(
                "{} holds a {} model; explanation needs an attr-only checkpoint",
                path.display(),
                model.kind()
            );
        }
        if let Ok(meta) = serde_json::from_value::<RunMeta>(ck.meta["extra"]["provenance"].clone())
        {
            require_same_config(&meta, cfg, path, "collab train --model attr-only")?;
        }
        let scope: Scope = ck.meta["extra"]["scope"]
            .as_str()
            .unwrap_or("all")
            .parse()?;
        let datasets = self.load_examples()?;
        let examples: Vec<&PatientExample> = datasets
            .iter()
            .filter(|(c, _)| scope.includes(**c))
            .flat_map(|(_, v)| v)
            .collect();
        let report = explain_cohort(&model, &examples, &cfg.explain, cfg.meta(cfg.explain.seed))?;
        let dir = self.out().join(EXPLAIN_DIR);
        fresh_dir(&dir)?;
        let paths = [dir.join("ranking.csv"), dir.join("shap.json")];
        write_ranking_csv(&report.ranking, &report.meta, &paths[0])?;
        write_explanation_json(&report, &paths[1])?;
        Ok(paths.to_vec())
    }

    pub fn correlate(&self) -> Result<Vec<PathBuf>> {
        let cfg = &self.config;
        let cohort = self.load_cohort()?;
        let report = CorrelationReport {
            meta: cfg.meta(cfg.synth.seed),
            entries: confounder_report(&cohort.patients, cfg.correlate.pooled)?,
        };
        let dir = self.out().join(CORRELATE_DIR);
        fresh_dir(&dir)?;
        let paths = [dir.join("correlations.csv"), dir.join("correlations.json")];
        write_correlations_csv(&report.entries, &report.meta, &paths[0])?;
        write_json(&report, &paths[1])?;
        Ok(paths.to_vec())
    }

    /// One summary document plus charts and their data, from the outputs of
    /// `compare`, `explain` and `correlate`.
    pub fn report(&self) -> Result<Vec<PathBuf>> {
        let cfg = &self.config;
        let out = self.out();
        let compare_path = out.join(COMPARE_DIR).join("report.json");
        let explain_path = out.join(EXPLAIN_DIR).join("shap.json");
        let correlate_path = out.join(CORRELATE_DIR).join("correlations.json");
        require(&compare_path, "collab compare")?;
        require(&explain_path, "collab explain")?;
        require(&correlate_path, "collab correlate")?;
        let experiment: ExperimentReport = read_json(&compare_path)?;
        let explanation: ExplanationReport = read_json(&explain_path)?;
        let correlations: CorrelationReport = read_json(&correlate_path)?;
        require_same_config(&experiment.meta, cfg, &compare_path, "collab compare")?;
        require_same_config(&explanation.meta, cfg, &explain_path, "collab explain")?;
        require_same_config(&correlations.meta, cfg, &correlate_path, "collab correlate")?;
        let cohort = self.load_cohort()?;

        let dir = out.join(REPORT_DIR);
        fresh_dir(&dir)?;
        let paths = [
            dir.join("summary.md"),
            dir.join("accuracy.csv"),
            dir.join("accuracy.svg"),
            dir.join("attributes.csv"),
            dir.join("attributes.svg"),
        ];
        let summary = report::summary_markdown(
            cfg,
            &cohort,
            &experiment,
            &explanation,
            &correlations.entries,
        );
        fs::write(&paths[0], summary).with_context(|| format!("writing {}", paths[0].display()))?;
        write_report_csv(&experiment, &paths[1])?;
        write_report_svg(&experiment, &paths[2])?;
        write_ranking_csv(&explanation.ranking, &explanation.meta, &paths[3])?;
        fs::write(
            &paths[4],
            report::attributes_svg(&explanation.ranking, &explanation.meta, report::CHART_TOP),
        )
        .with_context(|| format!("writing {}", paths[4].display()))?;
        Ok(paths.to_vec())
    }
}
