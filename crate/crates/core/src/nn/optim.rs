use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// Named parameter tensors in a fixed order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    pub entries: Vec<(String, Matrix)>,
}

impl ParamSet {
    pub fn push(&mut self, name: impl Into<String>, m: Matrix) {
        self.entries.push((name.into(), m));
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|(_, m)| m.data().len()).sum()
    }

    /// A set with the same names and shapes, all zeros.
    pub fn zeros_like(&self) -> ParamSet {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|(n, m)| (n.clone(), Matrix::zeros(m.rows(), m.cols())))
                .collect(),
        }
    }

    pub fn check_same_layout(&self, other: &ParamSet) -> Result<()> {
        if self.entries.len() != other.entries.len() {
            return Err(Error::dimension(
                "parameter count",
                self.entries.len(),
                other.entries.len(),
            ));
        }
        for ((na, a), (nb, b)) in self.entries.iter().zip(&other.entries) {
            if na != nb || a.shape() != b.shape() {
                return Err(Error::dimension(
                    format!("parameter {na}"),
                    format!("{na} {:?}", a.shape()),
                    format!("{nb} {:?}", b.shape()),
                ));
            }
        }
        Ok(())
    }

    /// `self += scale * other` (layouts must match).
    pub fn add_scaled(&mut self, other: &ParamSet, scale: f64) {
        for ((_, a), (_, b)) in self.entries.iter_mut().zip(&other.entries) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (_, m) in &mut self.entries {
            m.data_mut().iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, m) in &self.entries {
            m.check_finite(name)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam optimizer state: first/second moment estimates and step count.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub t: u64,
    m: ParamSet,
    v: ParamSet,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParamSet) -> Self {
        Adam {
            config,
            t: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    /// One bias-corrected Adam update of `params` with gradients `grads`.
    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamSet) -> Result<()> {
        params.check_same_layout(grads)?;
        params.check_same_layout(&self.m)?;
        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (k, (_, p)) in params.entries.iter_mut().enumerate() {
            let g = grads.entries[k].1.data();
            let m = self.m.entries[k].1.data_mut();
            let v = self.v.entries[k].1.data_mut();
            for (i, theta) in p.data_mut().iter_mut().enumerate() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
