//! Shapley attribution over the attribute-only model's pooled presence
//! features.
//!
//! Two estimators share one result type: exact enumeration over a feature
//! subset of at most 20 (the oracle), and permutation sampling over every
//! feature. The baseline is explicit in every result; the pipeline uses the
//! all-zeros vector, "no attribute present".

mod report;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{cell_seed, PatientExample, RunMeta};
use crate::graph::{feature_name, FEATURE_DIM};
use crate::models::{train, GraphInput, Instance, Model, ModelKind, TrainConfig, TrainedModel};
use crate::nn::maxpool_readout;

pub use report::{write_explanation_json, write_ranking_csv, ExplanationReport, InstanceShap};

/// Largest subset `shapley_exact` enumerates (2^20 coalitions).
pub const MAX_EXACT_FEATURES: usize = 20;

/// Permutations per parallel work unit of the sampled estimator.
const PERMUTATIONS_PER_BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Estimator {
    Exact,
    Sampled { n_permutations: usize, seed: u64 },
}

/// Attributions for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapResult {
    pub estimator: Estimator,
    /// The reference input; features outside a coalition take these values.
    pub baseline: Vec<f64>,
    /// Attributed feature indices, parallel to `values`.
    pub features: Vec<usize>,
    pub values: Vec<f64>,
    /// Monte-Carlo standard errors; zero in exact mode (and with a single
    /// permutation, where the spread is undefined).
    pub std_errors: Vec<f64>,
    /// Model output with every attributed feature at its baseline.
    pub base_value: f64,
    /// Model output at the instance.
    pub output: f64,
}

impl ShapResult {
    /// |Σ values − (output − base_value)|.
    pub fn efficiency_residual(&self) -> f64 {
        (self.values.iter().sum::<f64>() - (self.output - self.base_value)).abs()
    }

    pub fn value_of(&self, feature: usize) -> Option<f64> {
        self.features
            .iter()
            .position(|&f| f == feature)
            .map(|i| self.values[i])
    }
}

fn check_inputs(x: &[f64], baseline: &[f64]) -> Result<()> {
    if x.len() != baseline.len() {
        return Err(Error::dimension(
            "Shapley baseline",
            x.len(),
            baseline.len(),
        ));
    }
    if x.iter().chain(baseline).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Shapley input".into()));
    }
    Ok(())
}

/// Exact Shapley values of the features in `subset` by enumerating all
/// coalitions; features outside `subset` stay at their value in `x`.
pub fn shapley_exact<F>(
    model_fn: F,
    x: &[f64],
    baseline: &[f64],
    subset: &[usize],
) -> Result<ShapResult>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    check_inputs(x, baseline)?;
    let m = subset.len();
    if m > MAX_EXACT_FEATURES {
        return Err(Error::ShapleySize(m));
    }
    for (i, &f) in subset.iter().enumerate() {
        if f >= x.len() {
            return Err(Error::dimension(
                "Shapley feature index",
                format!("< {}", x.len()),
                f,
            ));
        }
        if subset[..i].contains(&f) {
            return Err(Error::invariant(
                "subset",
                format!("feature {f} listed twice"),
            ));
        }
    }

    // v[mask]: bit i set means subset[i] takes its instance value.
    let mut z = x.to_vec();
    let mut v = Vec::with_capacity(1 << m);
    for mask in 0usize..1 << m {
        for (i, &f) in subset.iter().enumerate() {
            z[f] = if mask >> i & 1 == 1 {
                x[f]
            } else {
                baseline[f]
            };
        }
        v.push(model_fn(&z)?);
    }

    // weight[t] = t!(m−t−1)!/m! = 1 / (m · C(m−1, t)).
    let mut weight = Vec::with_capacity(m);
    let mut binom = 1.0;
    for t in 0..m {
        weight.push(1.0 / (m as f64 * binom));
        binom = binom * (m - 1 - t) as f64 / (t + 1) as f64;
    }
    let mut values = vec![0.0; m];
    for mask in 0usize..1 << m {
        // A clear bit implies |mask| < m, so the weight index is in range.
        let t = mask.count_ones() as usize;
        for (i, value) in values.iter_mut().enumerate() {
            if mask >> i & 1 == 0 {
                *value += weight[t] * (v[mask | 1 << i] - v[mask]);
            }
        }
    }
    Ok(ShapResult {
        estimator: Estimator::Exact,
        baseline: baseline.to_vec(),
        features: subset.to_vec(),
        values,
        std_errors: vec![0.0; m],
        base_value: v[0],
        output: v[(1 << m) - 1],
    })
}

/// Per-feature sums of marginal contributions and of their squares.
struct Moments {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

/// Permutation-sampling Shapley estimate over every feature of `x`.
///
/// Each permutation walks from the baseline to `x` one feature at a time and
/// credits each feature with the change it causes. Features whose instance
/// value equals the baseline never change the input, so they contribute
/// exactly zero and are left out of the walk; the order of the remaining
/// features is still uniformly random. Permutations run in fixed-size
/// batches, each seeded from `seed` and its batch index, so the estimate does
/// not depend on the thread count.
pub fn shapley_sampled<F>(
    model_fn: F,
    x: &[f64],
    baseline: &[f64],
    n_permutations: usize,
    seed: u64,
) -> Result<ShapResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    check_inputs(x, baseline)?;
    if n_permutations == 0 {
        return Err(Error::config("n_permutations", "must be at least 1"));
    }
    let d = x.len();
    let active: Vec<usize> = (0..d).filter(|&j| x[j] != baseline[j]).collect();
    let base_value = model_fn(baseline)?;
    let output = model_fn(x)?;

    let n_batches = n_permutations.div_ceil(PERMUTATIONS_PER_BATCH);
    let batches = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let count = PERMUTATIONS_PER_BATCH.min(n_permutations - b * PERMUTATIONS_PER_BATCH);
            let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(seed, &[b as u64]));
            let mut order = active.clone();
            let mut z = baseline.to_vec();
            let mut m = Moments {
                sum: vec![0.0; d],
                sum_sq: vec![0.0; d],
            };
            for _ in 0..count {
                order.shuffle(&mut rng);
                z.copy_from_slice(baseline);
                let mut prev = base_value;
                for (k, &j) in order.iter().enumerate() {
                    z[j] = x[j];
                    // The full walk ends at `x`; reuse its output so every
                    // permutation's contributions sum to output − base_value.
                    let cur = if k + 1 == order.len() {
                        output
                    } else {
                        model_fn(&z)?
                    };
                    let delta = cur - prev;
                    m.sum[j] += delta;
                    m.sum_sq[j] += delta * delta;
                    prev = cur;
                }
            }
            Ok(m)
        })
        .collect::<Result<Vec<Moments>>>()?;

    let mut total = Moments {
        sum: vec![0.0; d],
        sum_sq: vec![0.0; d],
    };
    for b in &batches {
        for j in 0..d {
            total.sum[j] += b.sum[j];
            total.sum_sq[j] += b.sum_sq[j];
        }
    }
    let n = n_permutations as f64;
    let values: Vec<f64> = total.sum.iter().map(|s| s / n).collect();
    let std_errors = (0..d)
        .map(|j| {
            if n_permutations < 2 {
                return 0.0;
            }
            let var = (total.sum_sq[j] - n * values[j] * values[j]) / (n - 1.0);
            (var.max(0.0) / n).sqrt()
        })
        .collect();
    Ok(ShapResult {
        estimator: Estimator::Sampled {
            n_permutations,
            seed,
        },
        baseline: baseline.to_vec(),
        features: (0..d).collect(),
        values,
        std_errors,
        base_value,
        output,
    })
}

/// Max-pooled node features: 1 where some node carries the attribute.
/// A graph without nodes pools to all zeros, matching the models.
pub fn pooled_presence(graph: &GraphInput) -> Result<Vec<f64>> {
    if graph.num_nodes() == 0 {
        return Ok(vec![0.0; graph.features.cols()]);
    }
    maxpool_readout(&graph.features).map(|p| p.values)
}

/// Sampled attributions of an attribute-only model for every graph, against
/// the all-zeros baseline. Instance `i` uses the seed derived from `(seed, i)`.
pub fn explain_attr_model(
    model: &Model,
    graphs: &[&GraphInput],
    n_permutations: usize,
    seed: u64,
) -> Result<Vec<ShapResult>> {
    if model.kind() != ModelKind::AttrOnly {
        return Err(Error::Contract(format!(
            "explanations target the attr-only model, got {}",
            model.kind()
        )));
    }
    let baseline = vec![0.0; FEATURE_DIM];
    graphs
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let x = pooled_presence(g)?;
            shapley_sampled(
                |z| model.predict_pooled(z),
                &x,
                &baseline,
                n_permutations,
                cell_seed(seed, &[i as u64]),
            )
        })
        .collect()
}

/// Settings of an explanation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub n_permutations: usize,
    pub seed: u64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            n_permutations: 5000,
            seed: 7,
        }
    }
}

/// Fits the attribute-only model to the whole cohort (every cancer type
/// together) with `train_config`, seeded from `config.seed`.
pub fn fit_explanation_model(
    examples: &[&PatientExample],
    train_config: &TrainConfig,
    config: &ExplainConfig,
) -> Result<TrainedModel> {
    let instances: Vec<Instance<'_>> = examples
        .iter()
        .map(|e| e.instance(ModelKind::AttrOnly))
        .collect();
    let labels: Vec<bool> = examples.iter().map(|e| e.survived).collect();
    train(
        ModelKind::AttrOnly,
        &instances,
        &labels,
        train_config,
        config.seed,
    )
}

/// Attributions for every example under a trained attribute-only model, and
/// their cohort ranking.
pub fn explain_cohort(
    model: &Model,
    examples: &[&PatientExample],
    config: &ExplainConfig,
    meta: RunMeta,
) -> Result<ExplanationReport> {
    let graphs: Vec<&GraphInput> = examples.iter().map(|e| &e.graph).collect();
    let results = explain_attr_model(model, &graphs, config.n_permutations, config.seed)?;
    let ranking = rank_attributes(&results)?;
    Ok(ExplanationReport {
        meta,
        baseline: "all-zeros (no attribute present)".into(),
        ranking,
        instances: examples
            .iter()
            .zip(results)
            .map(|(e, result)| InstanceShap {
                patient_id: e.patient_id.clone(),
                result,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAttribute {
    /// 1-based position.
    pub rank: usize,
    pub feature: usize,
    pub name: String,
    pub mean_abs: f64,
    pub min: f64,
    pub max: f64,
}

/// Cohort-level attribute influence, most influential first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeRanking {
    pub n_instances: usize,
    pub entries: Vec<RankedAttribute>,
}

impl AttributeRanking {
    /// 1-based rank of `feature`, if it was attributed.
    pub fn rank_of(&self, feature: usize) -> Option<usize> {
        self.entries
            .iter()
            .find(|e| e.feature == feature)
            .map(|e| e.rank)
    }
}

/// Ranks attributes by mean |Shapley value| across `results`, breaking ties
/// by feature index. All results must attribute the same features.
pub fn rank_attributes(results: &[ShapResult]) -> Result<AttributeRanking> {
    let first = results
        .first()
        .ok_or_else(|| Error::DegenerateData("ranking needs at least one result".into()))?;
    let features = &first.features;
    if let Some(r) = results.iter().find(|r| &r.features != features) {
        return Err(Error::dimension(
            "attributed feature set",
            format!("{} features", features.len()),
            format!("{} features", r.features.len()),
        ));
    }
    let n = results.len() as f64;
    let mut entries: Vec<RankedAttribute> = features
        .iter()
        .enumerate()
        .map(|(i, &feature)| {
            let vals = results.iter().map(|r| r.values[i]);
            RankedAttribute {
                rank: 0,
                feature,
                name: if feature < FEATURE_DIM {
                    feature_name(feature)
                } else {
                    format!("feature{feature}")
                },
                mean_abs: vals.clone().map(f64::abs).sum::<f64>() / n,
                min: vals.clone().fold(f64::INFINITY, f64::min),
                max: vals.fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        b.mean_abs
            .total_cmp(&a.mean_abs)
            .then(a.feature.cmp(&b.feature))
    });
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    Ok(AttributeRanking {
        n_instances: results.len(),
        entries,
    })
}
