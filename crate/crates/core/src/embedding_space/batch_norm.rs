use serde::{Deserialize, Serialize};

use crate::diffcore::Matrix;
use crate::error::{DctError, Result};

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

/// Scale-only batch normalization parameters and running statistics.
///
/// There is no shift parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNormState {
    pub gamma: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

/// Saved forward intermediates for [`nobias_bn_backward`].
#[derive(Debug, Clone)]
pub struct BatchNormCache {
    pub normalized: Matrix,
    pub inv_std: Vec<f64>,
    pub gamma: Vec<f64>,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
}

impl BatchNormState {
    pub fn new(dim: usize) -> Self {
        Self::with_options(dim, DEFAULT_MOMENTUM, DEFAULT_EPS)
    }

    pub fn with_options(dim: usize, momentum: f64, eps: f64) -> Self {
        Self {
            gamma: vec![1.0; dim],
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum,
            eps,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    /// Train mode normalizes with batch statistics and folds them into the
    /// running statistics; eval mode uses the running statistics only.
    pub fn forward(&mut self, batch: &Matrix, train_mode: bool) -> Result<(Matrix, Option<BatchNormCache>)> {
        if train_mode {
            let (out, cache) = nobias_bn_train(&self.gamma, self.eps, batch)?;
            self.absorb_batch_stats(&cache.batch_mean, &cache.batch_var);
            Ok((out, Some(cache)))
        } else {
            Ok((self.forward_eval(batch)?, None))
        }
    }

    pub fn forward_eval(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_dim(batch)?;
        let scale: Vec<f64> = self
            .gamma
            .iter()
            .zip(&self.running_var)
            .map(|(g, v)| g / (v + self.eps).sqrt())
            .collect();
        let mut out = batch.clone();
        for r in 0..out.rows() {
            for ((o, m), s) in out.row_mut(r).iter_mut().zip(&self.running_mean).zip(&scale) {
                *o = (*o - m) * s;
            }
        }
        Ok(out)
    }

    /// Convex update `running = (1 - m) * running + m * batch`.
    pub fn absorb_batch_stats(&mut self, mean: &[f64], var: &[f64]) {
        let m = self.momentum;
        for (r, b) in self.running_mean.iter_mut().zip(mean) {
            *r = (1.0 - m) * *r + m * b;
        }
        for (r, b) in self.running_var.iter_mut().zip(var) {
            *r = ((1.0 - m) * *r + m * b).max(0.0);
        }
    }

    fn check_dim(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.dim() {
            return Err(DctError::ShapeMismatch {
                context: "batch norm input".into(),
                expected: (batch.rows(), self.dim()),
                got: batch.shape(),
            });
        }
        Ok(())
    }
}

/// Train-mode forward: `γ (x − μ_B) / sqrt(σ²_B + ε)` with the biased batch variance.
pub fn nobias_bn_train(gamma: &[f64], eps: f64, batch: &Matrix) -> Result<(Matrix, BatchNormCache)> {
    let (n, d) = batch.shape();
    if d != gamma.len() {
        return Err(DctError::ShapeMismatch {
            context: "batch norm input".into(),
            expected: (n, gamma.len()),
            got: batch.shape(),
        });
    }
    if n < 2 {
        return Err(DctError::BatchTooSmall(n));
    }
    let inv_n = 1.0 / n as f64;
    let mean: Vec<f64> = batch.column_sums().iter().map(|s| s * inv_n).collect();
    let mut var = vec![0.0; d];
    for r in 0..n {
        for ((v, x), m) in var.iter_mut().zip(batch.row(r)).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    var.iter_mut().for_each(|v| *v *= inv_n);
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();

    let mut normalized = Matrix::zeros(n, d);
    let mut out = Matrix::zeros(n, d);
    for r in 0..n {
        for c in 0..d {
            let xh = (batch[(r, c)] - mean[c]) * inv_std[c];
            normalized[(r, c)] = xh;
            out[(r, c)] = gamma[c] * xh;
        }
    }
    Ok((
        out,
        BatchNormCache {
            normalized,
            inv_std,
            gamma: gamma.to_vec(),
            batch_mean: mean,
            batch_var: var,
        },
    ))
}

/// Gradients through the batch statistics. Returns `(input_grad, gamma_grad)`.
pub fn nobias_bn_backward(cache: &BatchNormCache, upstream: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    upstream.ensure_shape(cache.normalized.shape(), "nobias_bn_backward")?;
    let (n, d) = upstream.shape();
    let nf = n as f64;
    let mut gamma_grad = vec![0.0; d];
    let mut sum_dxh = vec![0.0; d];
    let mut sum_dxh_xh = vec![0.0; d];
    for r in 0..n {
        for c in 0..d {
            let g = upstream[(r, c)];
            let xh = cache.normalized[(r, c)];
            gamma_grad[c] += g * xh;
            let dxh = g * cache.gamma[c];
            sum_dxh[c] += dxh;
            sum_dxh_xh[c] += dxh * xh;
        }
    }
    let mut input_grad = Matrix::zeros(n, d);
    for r in 0..n {
        for c in 0..d {
            let dxh = upstream[(r, c)] * cache.gamma[c];
            let xh = cache.normalized[(r, c)];
            input_grad[(r, c)] =
                cache.inv_std[c] / nf * (nf * dxh - sum_dxh[c] - xh * sum_dxh_xh[c]);
        }
    }
    Ok((input_grad, gamma_grad))
}
