use crate::diffcore::Matrix;
use crate::error::{DctError, Result};

/// Rows with a norm below this are rejected.
pub const MIN_ROW_NORM: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct FeatureNormCache {
    pub unit: Matrix,
    pub norms: Vec<f64>,
}

/// Scales each row to unit L2 norm.
pub fn feature_normalize_forward(batch: &Matrix) -> Result<(Matrix, FeatureNormCache)> {
    let mut unit = batch.clone();
    let mut norms = Vec::with_capacity(batch.rows());
    for r in 0..batch.rows() {
        let norm = batch.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm.is_nan() || norm < MIN_ROW_NORM {
            return Err(DctError::ZeroNormRow { row: r, norm });
        }
        unit.row_mut(r).iter_mut().for_each(|v| *v /= norm);
        norms.push(norm);
    }
    Ok((unit.clone(), FeatureNormCache { unit, norms }))
}

/// Applies `(I − x̂x̂ᵀ) / ‖x‖` to each upstream row.
pub fn feature_normalize_backward(cache: &FeatureNormCache, upstream: &Matrix) -> Result<Matrix> {
    upstream.ensure_shape(cache.unit.shape(), "feature_normalize_backward")?;
    let mut grad = upstream.clone();
    for r in 0..grad.rows() {
        let u = cache.unit.row(r);
        let proj: f64 = u.iter().zip(upstream.row(r)).map(|(a, b)| a * b).sum();
        let inv = 1.0 / cache.norms[r];
        for (g, &uv) in grad.row_mut(r).iter_mut().zip(u) {
            *g = (*g - proj * uv) * inv;
        }
    }
    Ok(grad)
}
