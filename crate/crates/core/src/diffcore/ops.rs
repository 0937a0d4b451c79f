use super::matrix::Matrix;
use crate::error::{DctError, Result};

/// Squared Euclidean distances between all row pairs.
///
/// The result is symmetric with an exactly zero diagonal and no negative entries.
pub fn pairwise_sq_distances(embeddings: &Matrix) -> Matrix {
    let n = embeddings.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        let a = embeddings.row(i);
        for j in (i + 1)..n {
            let d: f64 = a
                .iter()
                .zip(embeddings.row(j))
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            let d = d.max(0.0);
            out[(i, j)] = d;
            out[(j, i)] = d;
        }
    }
    out
}

/// Mean softmax cross-entropy and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    let (n, c) = logits.shape();
    if labels.len() != n {
        return Err(DctError::ShapeMismatch {
            context: "softmax_cross_entropy labels".into(),
            expected: (n, 1),
            got: (labels.len(), 1),
        });
    }
    if n == 0 {
        return Err(DctError::EmptyInput("softmax_cross_entropy batch"));
    }
    let mut grad = Matrix::zeros(n, c);
    let mut loss = 0.0;
    let inv_n = 1.0 / n as f64;
    for (r, &label) in labels.iter().enumerate() {
        if label >= c {
            return Err(DctError::LabelOutOfRange {
                label,
                num_classes: c,
            });
        }
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        let log_z = max + sum_exp.ln();
        loss += log_z - row[label];
        let g = grad.row_mut(r);
        for (k, gv) in g.iter_mut().enumerate() {
            let p = (row[k] - log_z).exp();
            *gv = (p - if k == label { 1.0 } else { 0.0 }) * inv_n;
        }
    }
    Ok((loss * inv_n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn distance_of_three_four_five() {
        let m = Matrix::from_rows(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        let d = pairwise_sq_distances(&m);
        assert_eq!(d.data(), &[0.0, 25.0, 25.0, 0.0]);
    }

    #[test]
    fn identical_rows_give_zero_matrix() {
        let m = Matrix::from_rows(&[[1.5, -2.0]; 4]).unwrap();
        assert!(pairwise_sq_distances(&m).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn distances_match_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = Matrix::from_fn(8, 5, |_, _| rng.random_range(-3.0..3.0));
        let d = pairwise_sq_distances(&m);
        for i in 0..8 {
            for j in 0..8 {
                let mut s = 0.0;
                for k in 0..5 {
                    let diff = m[(i, k)] - m[(j, k)];
                    s += diff * diff;
                }
                assert!((d[(i, j)] - s).abs() <= 1e-10 * s.max(1.0));
                assert_eq!(d[(i, j)], d[(j, i)]);
            }
            assert_eq!(d[(i, i)], 0.0);
        }
    }

    #[test]
    fn uniform_logits_give_log_c() {
        let logits = Matrix::from_rows(&[[0.3; 5], [0.3; 5]]).unwrap();
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 4]).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_logits_give_zero_loss() {
        let logits = Matrix::from_rows(&[[1000.0, 0.0, -1000.0]]).unwrap();
        let (loss, grad) = softmax_cross_entropy(&logits, &[0]).unwrap();
        assert!(loss.abs() < 1e-12);
        assert!(grad.data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn out_of_range_label_rejected() {
        let logits = Matrix::zeros(1, 3);
        assert!(matches!(
            softmax_cross_entropy(&logits, &[3]),
            Err(DctError::LabelOutOfRange { label: 3, .. })
        ));
    }
}
