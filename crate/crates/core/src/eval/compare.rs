//! The per-cancer-type model comparison.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{stratified_kfold, Fold};
use super::metrics::{evaluate, Metrics};
use super::PatientExample;
use crate::error::{Error, Result};
use crate::models::{stratified_holdout, train, Instance, ModelKind, TrainConfig};
use crate::provenance::RunMeta;
use crate::synth::CancerType;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Protocol {
    /// Stratified k-fold cross-validation (primary protocol).
    CrossValidation { k: usize },
    /// One stratified train/test split.
    Holdout { test_fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub protocol: Protocol,
    pub seed: u64,
    pub models: Vec<ModelKind>,
    pub train: TrainConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            protocol: Protocol::CrossValidation { k: 5 },
            seed: 7,
            models: ModelKind::COMPARED.to_vec(),
            train: TrainConfig::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        match self.protocol {
            Protocol::CrossValidation { k } if k < 2 => {
                return Err(Error::config("protocol.k", "need at least 2 folds"))
            }
            Protocol::Holdout { test_fraction }
                if !(test_fraction > 0.0 && test_fraction < 1.0) =>
            {
                return Err(Error::config(
                    "protocol.test_fraction",
                    "must lie in (0, 1)",
                ))
            }
            _ => {}
        }
        if self.models.is_empty() {
            return Err(Error::config("models", "at least one model is required"));
        }
        self.train.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub metrics: Metrics,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellOutcome {
    Ok {
        /// Counts summed over test folds (each patient is tested once).
        total: Metrics,
        mean_accuracy: f64,
        sd_accuracy: f64,
        folds: Vec<FoldResult>,
    },
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub cancer_type: CancerType,
    pub model: ModelKind,
    #[serde(flatten)]
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub meta: RunMeta,
    pub protocol: Protocol,
    pub cells: Vec<CellReport>,
}

impl ExperimentReport {
    pub fn cell(&self, cancer: CancerType, model: ModelKind) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.cancer_type == cancer && c.model == model)
    }

    /// Mean fold accuracy of a successful cell.
    pub fn mean_accuracy(&self, cancer: CancerType, model: ModelKind) -> Option<f64> {
        match self.cell(cancer, model)?.outcome {
            CellOutcome::Ok { mean_accuracy, .. } => Some(mean_accuracy),
            CellOutcome::Failed { .. } => None,
        }
    }
}

/// Deterministic 64-bit seed derived from a master seed and coordinates.
pub fn cell_seed(master: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

fn make_folds(labels: &[bool], protocol: Protocol, seed: u64) -> Result<Vec<Fold>> {
    match protocol {
        Protocol::CrossValidation { k } => stratified_kfold(labels, k, seed),
        Protocol::Holdout { test_fraction } => {
            let pos = labels.iter().filter(|&&y| y).count();
            if pos < 2 || labels.len() - pos < 2 {
                return Err(Error::Stratification(format!(
                    "holdout split needs two samples of each class; got {pos} survived of {}",
                    labels.len()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (train, test) = stratified_holdout(labels, test_fraction, &mut rng);
            Ok(vec![Fold { train, test }])
        }
    }
}

struct Unit {
    cancer: usize,
    model: usize,
    fold: usize,
}

fn run_unit(
    examples: &[PatientExample],
    fold: &Fold,
    kind: ModelKind,
    config: &TrainConfig,
    seed: u64,
    fold_index: usize,
) -> Result<FoldResult> {
    let instances: Vec<Instance> = fold
        .train
        .iter()
        .map(|&i| examples[i].instance(kind))
        .collect();
    let labels: Vec<bool> = fold.train.iter().map(|&i| examples[i].survived).collect();
    let trained = train(kind, &instances, &labels, config, seed)?;
    let test_inst: Vec<Instance> = fold
        .test
        .iter()
        .map(|&i| examples[i].instance(kind))
        .collect();
    let test_labels: Vec<bool> = fold.test.iter().map(|&i| examples[i].survived).collect();
    Ok(FoldResult {
        fold: fold_index,
        n_train: fold.train.len(),
        metrics: evaluate(&trained.model, &test_inst, &test_labels)?,
        best_epoch: trained.history.best_epoch,
        epochs_run: trained.history.train_loss.len(),
    })
}

/// Trains and evaluates every configured model on every cancer type with
/// shared folds. A failing cell is recorded in the report, not propagated.
/// `jobs` > 1 runs (cancer, model, fold) units on a thread pool; results are
/// identical for any `jobs`.
pub fn run_comparison(
    datasets: &BTreeMap<CancerType, Vec<PatientExample>>,
    config: &EvalConfig,
    meta: RunMeta,
    jobs: usize,
) -> Result<ExperimentReport> {
    config.validate()?;
    let cancers: Vec<CancerType> = datasets.keys().copied().collect();
    let folds: Vec<Result<Vec<Fold>>> = cancers
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let labels: Vec<bool> = datasets[c].iter().map(|e| e.survived).collect();
            make_folds(
                &labels,
                config.protocol,
                cell_seed(config.seed, &[ci as u64, 0]),
            )
        })
        .collect();

    let mut units = Vec::new();
    for (ci, f) in folds.iter().enumerate() {
        if let Ok(f) = f {
            for mi in 0..config.models.len() {
                for fi in 0..f.len() {
                    units.push(Unit {
                        cancer: ci,
                        model: mi,
                        fold: fi,
                    });
                }
            }
        }
    }

    let exec = |u: &Unit| -> Result<FoldResult> {
        let kind = config.models[u.model];
        let fold = &folds[u.cancer]
            .as_ref()
            .expect("units only for valid folds")[u.fold];
        let seed = cell_seed(
            config.seed,
            &[u.cancer as u64, 1, u.fold as u64, u.model as u64],
        );
        run_unit(
            &datasets[&cancers[u.cancer]],
            fold,
            kind,
            &config.train,
            seed,
            u.fold,
        )
        .map_err(|e| e.context(format!("{} / {kind} / fold {}", cancers[u.cancer], u.fold)))
    };
    let results: Vec<Result<FoldResult>> = if jobs <= 1 {
        units.iter().map(exec).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::config("jobs", e.to_string()))?;
        pool.install(|| units.par_iter().map(exec).collect())
    };

    let mut by_cell: BTreeMap<(usize, usize), Vec<Result<FoldResult>>> = BTreeMap::new();
    for (u, r) in units.iter().zip(results) {
        by_cell.entry((u.cancer, u.model)).or_default().push(r);
    }

    let mut cells = Vec::new();
    for (ci, &cancer) in cancers.iter().enumerate() {
        for (mi, &model) in config.models.iter().enumerate() {
            let outcome = match &folds[ci] {
                Err(e) => CellOutcome::Failed {
                    error: e.to_string(),
                },
                Ok(_) => {
                    let rs = by_cell.remove(&(ci, mi)).unwrap_or_default();
                    match rs.into_iter().collect::<Result<Vec<FoldResult>>>() {
                        Err(e) => CellOutcome::Failed {
                            error: e.to_string(),
                        },
                        Ok(folds) => summarize(folds),
                    }
                }
            };
            cells.push(CellReport {
                cancer_type: cancer,
                model,
                outcome,
            });
        }
    }
    Ok(ExperimentReport {
        meta,
        protocol: config.protocol,
        cells,
    })
}

fn summarize(folds: Vec<FoldResult>) -> CellOutcome {
    let accs: Vec<f64> = folds.iter().map(|f| f.metrics.accuracy).collect();
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let sd = if accs.len() > 1 {
        (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (accs.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let parts: Vec<Metrics> = folds.iter().map(|f| f.metrics).collect();
    CellOutcome::Ok {
        total: Metrics::sum(&parts),
        mean_accuracy: mean,
        sd_accuracy: sd,
        folds,
    }
}
