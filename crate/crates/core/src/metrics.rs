//! Cluster-structure and accuracy metrics over embedding snapshots.

use serde::{Deserialize, Serialize};

use crate::diffcore::{pairwise_sq_distances, Matrix};
use crate::error::{DctError, Result};

pub const DEFAULT_K: usize = 10;

/// Class vs domain cluster structure of one embedding snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionReport {
    pub class_silhouette: f64,
    pub domain_silhouette: f64,
    pub class_knn_purity: f64,
    pub domain_knn_purity: f64,
    pub k: usize,
}

impl DispersionReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Field-wise mean; `k` is taken from the first report.
    pub fn mean(reports: &[DispersionReport]) -> Option<DispersionReport> {
        let first = reports.first()?;
        let n = reports.len() as f64;
        let avg = |f: fn(&DispersionReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Some(DispersionReport {
            class_silhouette: avg(|r| r.class_silhouette),
            domain_silhouette: avg(|r| r.domain_silhouette),
            class_knn_purity: avg(|r| r.class_knn_purity),
            domain_knn_purity: avg(|r| r.domain_knn_purity),
            k: first.k,
        })
    }
}

fn check_labels(embeddings: &Matrix, labels: &[usize]) -> Result<()> {
    if labels.len() != embeddings.rows() {
        return Err(DctError::ShapeMismatch {
            context: "metric labels".into(),
            expected: (embeddings.rows(), 1),
            got: (labels.len(), 1),
        });
    }
    Ok(())
}

fn knn_purity_from_distances(sq: &Matrix, labels: &[usize], k: usize) -> f64 {
    let n = labels.len();
    let mut total = 0.0;
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        // stable sort keeps index order among equal distances
        order.sort_by(|&a, &b| sq[(i, a)].total_cmp(&sq[(i, b)]));
        let same = order[..k].iter().filter(|&&j| labels[j] == labels[i]).count();
        total += same as f64 / k as f64;
    }
    total / n as f64
}

/// Mean fraction of each point's `k` nearest neighbours (self excluded) sharing its label.
pub fn knn_purity(embeddings: &Matrix, labels: &[usize], k: usize) -> Result<f64> {
    check_labels(embeddings, labels)?;
    let n = labels.len();
    if k == 0 || k >= n {
        return Err(DctError::InvalidK { k, n });
    }
    Ok(knn_purity_from_distances(&pairwise_sq_distances(embeddings), labels, k))
}

fn silhouette_from_distances(sq: &Matrix, labels: &[usize]) -> Result<f64> {
    let n = labels.len();
    let num_labels = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; num_labels];
    labels.iter().for_each(|&l| sizes[l] += 1);
    let present = sizes.iter().filter(|&&s| s > 0).count();
    if present < 2 {
        return Err(DctError::TooFewLabels(present));
    }
    let mut total = 0.0;
    let mut sums = vec![0.0; num_labels];
    for i in 0..n {
        if sizes[labels[i]] == 1 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if j != i {
                sums[labels[j]] += sq[(i, j)].sqrt();
            }
        }
        let a = sums[labels[i]] / (sizes[labels[i]] - 1) as f64;
        let b = (0..num_labels)
            .filter(|&l| l != labels[i] && sizes[l] > 0)
            .map(|l| sums[l] / sizes[l] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

/// Mean silhouette coefficient with Euclidean distance; singleton clusters score 0.
pub fn silhouette(embeddings: &Matrix, labels: &[usize]) -> Result<f64> {
    check_labels(embeddings, labels)?;
    silhouette_from_distances(&pairwise_sq_distances(embeddings), labels)
}

/// Top-1 accuracy; argmax ties go to the lowest index.
pub fn accuracy(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    check_labels(logits, labels)?;
    if labels.is_empty() {
        return Err(DctError::EmptyInput("accuracy labels"));
    }
    let correct = (0..logits.rows())
        .filter(|&r| argmax(logits.row(r)) == labels[r])
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Silhouettes and k-NN purities under class and under domain labels.
/// `k` is clamped to `n − 1`.
pub fn dispersion_report(
    embeddings: &Matrix,
    class_labels: &[usize],
    domain_labels: &[usize],
    k: usize,
) -> Result<DispersionReport> {
    check_labels(embeddings, class_labels)?;
    check_labels(embeddings, domain_labels)?;
    let n = embeddings.rows();
    if n < 2 {
        return Err(DctError::InvalidK { k, n });
    }
    let k = k.min(n - 1).max(1);
    let sq = pairwise_sq_distances(embeddings);
    Ok(DispersionReport {
        class_silhouette: silhouette_from_distances(&sq, class_labels)?,
        domain_silhouette: silhouette_from_distances(&sq, domain_labels)?,
        class_knn_purity: knn_purity_from_distances(&sq, class_labels, k),
        domain_knn_purity: knn_purity_from_distances(&sq, domain_labels, k),
        k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn points(rows: &[[f64; 2]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn separated_groups_are_pure() {
        let x = points(&[[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [50.0, 50.0], [50.1, 50.0], [50.0, 50.1]]);
        let labels = [0, 0, 0, 1, 1, 1];
        assert_eq!(knn_purity(&x, &labels, 1).unwrap(), 1.0);
        assert!(silhouette(&x, &labels).unwrap() > 0.99);
    }

    #[test]
    fn hand_enumerated_six_points() {
        // points on a line at 0, 1, 3, 4, 10, 12 with labels a a b a b b
        let x = Matrix::new(6, 1, vec![0.0, 1.0, 3.0, 4.0, 10.0, 12.0]).unwrap();
        let labels = [0, 0, 1, 0, 1, 1];
        // 2-NN lists: 0:{1,2}->1/2, 1:{0,2}->1/2, 2:{3,1}->0, 3:{2,1}->1/2, 4:{5,3}->1/2, 5:{4,3}->1/2
        let expected = (0.5 + 0.5 + 0.0 + 0.5 + 0.5 + 0.5) / 6.0;
        assert!((knn_purity(&x, &labels, 2).unwrap() - expected).abs() < 1e-15);
        // 1-NN: 0->1 yes, 1->0 yes, 2->3 (d=1, tie with 1 at d=2? no, 3 is closer) no, 3->2 no, 4->5 yes, 5->4 yes
        assert!((knn_purity(&x, &labels, 1).unwrap() - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn distance_ties_break_by_index() {
        // point 0 has neighbours 1 and 2 both at distance 1
        let x = Matrix::new(3, 1, vec![0.0, -1.0, 1.0]).unwrap();
        let r = knn_purity(&x, &[0, 0, 1], 1).unwrap();
        // 0 -> 1 (same), 1 -> 0 (same), 2 -> 0 (diff)
        assert!((r - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn four_point_silhouette_by_hand() {
        // a = {0, 1}, b = {3, 5} on a line
        let x = Matrix::new(4, 1, vec![0.0, 1.0, 3.0, 5.0]).unwrap();
        let s = [
            (4.0 - 1.0) / 4.0, // a = 1, b = (3 + 5) / 2
            (3.0 - 1.0) / 3.0, // a = 1, b = (2 + 4) / 2
            (2.5 - 2.0) / 2.5, // a = 2, b = (3 + 2) / 2
            (4.5 - 2.0) / 4.5, // a = 2, b = (5 + 4) / 2
        ];
        let expected = s.iter().sum::<f64>() / 4.0;
        assert!((silhouette(&x, &[0, 0, 1, 1]).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn singleton_cluster_scores_zero() {
        let x = Matrix::new(3, 1, vec![0.0, 1.0, 10.0]).unwrap();
        // point 2 alone: 0; points 0,1: a=1, b=10 or 9
        let expected = ((10.0 - 1.0) / 10.0 + (9.0 - 1.0) / 9.0) / 3.0;
        assert!((silhouette(&x, &[0, 0, 1]).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let x = Matrix::zeros(3, 2);
        assert!(matches!(knn_purity(&x, &[0, 1, 0], 3), Err(DctError::InvalidK { .. })));
        assert!(matches!(silhouette(&x, &[1, 1, 1]), Err(DctError::TooFewLabels(1))));
    }

    #[test]
    fn random_labels_are_at_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 1200;
        let x = Matrix::from_fn(n, 4, |_, _| rng.sample(StandardNormal));
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
        let p = knn_purity(&x, &labels, 10).unwrap();
        assert!((p - 0.25).abs() <= 0.05, "{p}");
        let s = silhouette(&x, &labels).unwrap();
        assert!(s.abs() <= 0.1, "{s}");
    }

    #[test]
    fn accuracy_cases() {
        let perfect = points(&[[5.0, 0.0], [0.0, 5.0]]);
        assert_eq!(accuracy(&perfect, &[0, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&perfect, &[1, 0]).unwrap(), 0.0);
        // tie goes to class 0
        assert_eq!(accuracy(&points(&[[1.0, 1.0]]), &[0]).unwrap(), 1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20000;
        let logits = Matrix::from_fn(n, 5, |_, _| rng.sample(StandardNormal));
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
        assert!((accuracy(&logits, &labels).unwrap() - 0.2).abs() < 0.02);
    }

    #[test]
    fn report_json_keys() {
        let x = points(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let r = dispersion_report(&x, &[0, 0, 1, 1], &[0, 1, 0, 1], 10).unwrap();
        assert_eq!(r.k, 3);
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys.len(), 5);
        for key in ["class_silhouette", "domain_silhouette", "class_knn_purity", "domain_knn_purity", "k"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
