//! Small dense numerical kernel: matrices, GraphSAGE layers, max-pool readout,
//! dense layers, binary cross-entropy, hand-derived gradients and Adam.
//!
//! Every layer exposes a forward pass that returns a cache and a backward pass
//! that consumes it; composition into full models lives in `models`.

mod checkpoint;
mod loss;
mod matrix;
mod optim;
mod sage;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use loss::{bce_grad_logit, bce_loss, sigmoid, BCE_EPS};
pub use matrix::Matrix;
pub use optim::{Adam, AdamConfig, ParamSet};
pub use sage::{
    maxpool_backward, maxpool_readout, sage_backward, sage_forward, sage_forward_cached,
    AdjacencyList, MaxPool, SageCache, SageGrads, SageLayerParams,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(z),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }
}

/// `activation(W x + b)` for `W` of shape (d_out, d_in) and `b` of length d_out.
pub fn dense_forward(x: &[f64], w: &Matrix, b: &[f64], activation: Activation) -> Result<Vec<f64>> {
    let z = dense_affine(x, w, b)?;
    Ok(z.into_iter().map(|v| activation.apply(v)).collect())
}

/// `W x + b` without activation.
pub fn dense_affine(x: &[f64], w: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if w.cols() != x.len() {
        return Err(Error::dimension("dense input", w.cols(), x.len()));
    }
    if w.rows() != b.len() {
        return Err(Error::dimension("dense bias", w.rows(), b.len()));
    }
    Ok((0..w.rows())
        .map(|o| {
            w.row(o)
                .iter()
                .zip(x)
                .fold(b[o], |acc, (wi, xi)| acc + wi * xi)
        })
        .collect())
}

/// Backward of `z = W x + b` for upstream `dz`: returns (dW, db, dx).
pub fn dense_backward(x: &[f64], w: &Matrix, dz: &[f64]) -> (Matrix, Vec<f64>, Vec<f64>) {
    let mut dw = Matrix::zeros(w.rows(), w.cols());
    let mut dx = vec![0.0; w.cols()];
    for (o, &g) in dz.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        for (j, (dwj, &xj)) in dw.row_mut(o).iter_mut().zip(x).enumerate() {
            *dwj = g * xj;
            dx[j] += g * w.get(o, j);
        }
    }
    (dw, dz.to_vec(), dx)
}
