//! Mini-batch Adam training with class-weighted cross-entropy and early
//! stopping on a stratified validation split.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Instance, Model, ModelKind, Tape, DEFAULT_HIDDEN};
use crate::error::{Error, Result};
use crate::nn::{bce_grad_logit, bce_loss, Adam, AdamConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    /// Share of each class held out for early stopping.
    pub val_fraction: f64,
    /// Weight each class by N / (2 · N_class) in the loss.
    pub class_weighting: bool,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: DEFAULT_HIDDEN,
            epochs: 200,
            patience: 20,
            batch_size: 16,
            val_fraction: 0.1,
            class_weighting: true,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden", self.hidden),
            ("epochs", self.epochs),
            ("patience", self.patience),
            ("batch_size", self.batch_size),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if !(0.0..0.5).contains(&self.val_fraction) {
            return Err(Error::config("val_fraction", "must lie in [0, 0.5)"));
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && a.lr.is_finite()) {
            return Err(Error::config("adam.lr", "must be positive and finite"));
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
            return Err(Error::config("adam.beta1/beta2", "must lie in [0, 1)"));
        }
        if !(a.eps > 0.0) {
            return Err(Error::config("adam.eps", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean weighted training loss per epoch (accumulated during the epoch).
    pub train_loss: Vec<f64>,
    /// Mean weighted validation loss after each epoch.
    pub val_loss: Vec<f64>,
    /// Best validation loss seen so far, per epoch.
    pub best_val_loss: Vec<f64>,
    /// Zero-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: Model,
    pub history: TrainHistory,
}

/// Loss weights `(deceased, survived)` equal to N / (2 · N_class).
pub fn class_weights(labels: &[bool]) -> (f64, f64) {
    let n = labels.len() as f64;
    let pos = labels.iter().filter(|&&y| y).count() as f64;
    let neg = n - pos;
    let w = |c: f64| if c > 0.0 { n / (2.0 * c) } else { 0.0 };
    (w(neg), w(pos))
}

/// Splits indices into (train, holdout), drawing `fraction` of each class
/// (rounded, at least one when the class has two or more members).
pub fn stratified_holdout<R: rand::Rng>(
    labels: &[bool],
    fraction: f64,
    rng: &mut R,
) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut hold = Vec::new();
    for class in [false, true] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(rng);
        let mut k = (fraction * idx.len() as f64).round() as usize;
        if fraction > 0.0 && idx.len() >= 2 {
            k = k.clamp(1, idx.len() - 1);
        } else {
            k = 0;
        }
        hold.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    hold.sort_unstable();
    (train, hold)
}

fn mean_loss(
    model: &Model,
    instances: &[Instance<'_>],
    labels: &[bool],
    idx: &[usize],
    weights: (f64, f64),
) -> Result<f64> {
    let mut total = 0.0;
    for &i in idx {
        let p = model.predict(instances[i])?;
        let w = if labels[i] { weights.1 } else { weights.0 };
        total += bce_loss(p, labels[i], w);
    }
    Ok(total / idx.len() as f64)
}

/// Trains a fresh model of `kind`; returns the parameters with the lowest
/// validation loss. Deterministic for a fixed `seed`.
pub fn train(
    kind: ModelKind,
    instances: &[Instance<'_>],
    labels: &[bool],
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainedModel> {
    config.validate()?;
    if instances.len() != labels.len() {
        return Err(Error::dimension(
            "training labels",
            instances.len(),
            labels.len(),
        ));
    }
    let n_pos = labels.iter().filter(|&&y| y).count();
    if labels.is_empty() || n_pos == 0 || n_pos == labels.len() {
        return Err(Error::DegenerateData(format!(
            "training set needs both classes; got {} survived of {}",
            n_pos,
            labels.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Model::new(kind, config.hidden, rng.next_u64())?;
    let (mut train_idx, val_idx) = stratified_holdout(labels, config.val_fraction, &mut rng);
    let train_labels: Vec<bool> = train_idx.iter().map(|&i| labels[i]).collect();
    let weights = if config.class_weighting {
        class_weights(&train_labels)
    } else {
        (1.0, 1.0)
    };

    let mut params = model.params();
    let mut adam = Adam::new(config.adam, &params);
    let mut tape = Tape::new();
    let mut best = (f64::INFINITY, params.clone(), 0usize);
    let mut history = TrainHistory {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_val_loss: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
    };
    let mut since_best = 0;

    for epoch in 0..config.epochs {
        train_idx.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in train_idx.chunks(config.batch_size) {
            let mut grads = params.zeros_like();
            for &i in batch {
                let y = labels[i];
                let w = if y { weights.1 } else { weights.0 };
                let p = model.forward(&mut tape, instances[i])?;
                epoch_loss += bce_loss(p, y, w);
                let g = model.backward(&mut tape, instances[i], bce_grad_logit(p, y, w))?;
                grads.add_scaled(&g, 1.0);
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut params, &grads)?;
            model
                .set_params(&params)
                .map_err(|e| e.context(format!("{kind} training diverged at epoch {epoch}")))?;
        }
        let train_loss = epoch_loss / train_idx.len() as f64;
        let val_loss = if val_idx.is_empty() {
            train_loss
        } else {
            mean_loss(&model, instances, labels, &val_idx, weights)?
        };
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        if val_loss < best.0 {
            best = (val_loss, params.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
        }
        history.best_val_loss.push(best.0);
        if since_best >= config.patience {
            history.stopped_early = true;
            break;
        }
    }

    history.best_epoch = best.2;
    model.set_params(&best.1)?;
    Ok(TrainedModel { model, history })
}
