use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::diffcore::Matrix;
use crate::error::{DctError, Result};

/// Parameters of the mixture; [`MixtureConfig::build`] draws the geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureConfig {
    pub feature_dim: usize,
    pub num_classes: usize,
    pub num_domains: usize,
    pub class_scale: f64,
    pub domain_scale: f64,
    pub noise_sigma: f64,
    /// Seed for class means and domain offsets; the run seed is used when absent.
    pub geometry_seed: Option<u64>,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        Self {
            feature_dim: 16,
            num_classes: 4,
            num_domains: 4,
            class_scale: 1.0,
            domain_scale: 4.0,
            noise_sigma: 0.5,
            geometry_seed: None,
        }
    }
}

impl MixtureConfig {
    /// Draws unit-norm class means and domain offsets.
    pub fn build(&self, seed: u64) -> Result<MixtureSpec> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.geometry_seed.unwrap_or(seed) ^ 0x6d69_7874_7572_6573);
        let mut unit = |dim: usize| -> Vec<f64> {
            loop {
                let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-8 {
                    return v.into_iter().map(|x| x / norm).collect();
                }
            }
        };
        let class_means = (0..self.num_classes).map(|_| unit(self.feature_dim)).collect();
        let domain_offsets = (0..self.num_domains).map(|_| unit(self.feature_dim)).collect();
        let spec = MixtureSpec {
            feature_dim: self.feature_dim,
            class_means,
            domain_offsets,
            noise_sigma: self.noise_sigma,
            class_scale: self.class_scale,
            domain_scale: self.domain_scale,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Materialized mixture: one mean per class, one offset per domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub feature_dim: usize,
    pub class_means: Vec<Vec<f64>>,
    pub domain_offsets: Vec<Vec<f64>>,
    pub noise_sigma: f64,
    pub class_scale: f64,
    pub domain_scale: f64,
}

impl MixtureSpec {
    pub fn num_classes(&self) -> usize {
        self.class_means.len()
    }

    pub fn num_domains(&self) -> usize {
        self.domain_offsets.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DctError::InvalidConfig(m));
        if self.feature_dim == 0 {
            return bad("feature_dim must be positive".into());
        }
        if self.num_classes() < 2 {
            return bad(format!("need at least 2 classes, got {}", self.num_classes()));
        }
        if self.num_domains() < 1 {
            return bad("need at least 1 domain".into());
        }
        if self
            .class_means
            .iter()
            .chain(&self.domain_offsets)
            .any(|v| v.len() != self.feature_dim || v.iter().any(|x| !x.is_finite()))
        {
            return bad(format!("all mean vectors must be finite with dim {}", self.feature_dim));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma {} must be > 0", self.noise_sigma));
        }
        if !(self.class_scale >= 0.0 && self.domain_scale >= 0.0) {
            return bad("signal scales must be non-negative".into());
        }
        Ok(())
    }

    /// Noise-free mean of cell `(class, domain)`.
    pub fn cell_mean(&self, class: usize, domain: usize) -> Vec<f64> {
        self.class_means[class]
            .iter()
            .zip(&self.domain_offsets[domain])
            .map(|(c, d)| self.class_scale * c + self.domain_scale * d)
            .collect()
    }
}

/// `n_per_cell` samples for every (class, domain) cell, ordered by class, then domain.
pub fn sample_dataset(spec: &MixtureSpec, n_per_cell: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    if n_per_cell == 0 {
        return Err(DctError::InvalidConfig("n_per_cell must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c_n, d_n, dim) = (spec.num_classes(), spec.num_domains(), spec.feature_dim);
    let total = c_n * d_n * n_per_cell;
    let mut data = Vec::with_capacity(total * dim);
    let mut classes = Vec::with_capacity(total);
    let mut domains = Vec::with_capacity(total);
    for c in 0..c_n {
        for d in 0..d_n {
            let mean = spec.cell_mean(c, d);
            for _ in 0..n_per_cell {
                data.extend(mean.iter().map(|m| {
                    let z: f64 = rng.sample(StandardNormal);
                    m + spec.noise_sigma * z
                }));
                classes.push(c);
                domains.push(d);
            }
        }
    }
    Dataset::new(Matrix::new(total, dim, data)?, classes, domains)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(class_scale: f64, domain_scale: f64, noise: f64) -> MixtureSpec {
        MixtureConfig {
            class_scale,
            domain_scale,
            noise_sigma: noise,
            num_domains: 3,
            ..MixtureConfig::default()
        }
        .build(7)
        .unwrap()
    }

    #[test]
    fn geometry_is_unit_norm_and_seeded() {
        let a = spec(1.0, 4.0, 0.5);
        for v in a.class_means.iter().chain(&a.domain_offsets) {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert_eq!(a, spec(1.0, 4.0, 0.5));
    }

    #[test]
    fn no_domain_signal_collapses_domains() {
        let ds = sample_dataset(&spec(1.0, 0.0, 1e-12), 3, 1).unwrap();
        for i in 0..ds.len() {
            for j in 0..ds.len() {
                if ds.class_labels[i] == ds.class_labels[j] {
                    for (a, b) in ds.features.row(i).iter().zip(ds.features.row(j)) {
                        assert!((a - b).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn no_class_signal_collapses_classes() {
        let ds = sample_dataset(&spec(0.0, 4.0, 1e-12), 3, 1).unwrap();
        for i in 0..ds.len() {
            for j in 0..ds.len() {
                if ds.domain_labels[i] == ds.domain_labels[j] {
                    for (a, b) in ds.features.row(i).iter().zip(ds.features.row(j)) {
                        assert!((a - b).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn cell_means_within_three_sigma() {
        let s = spec(1.0, 4.0, 0.5);
        let n = 200;
        let ds = sample_dataset(&s, n, 99).unwrap();
        let bound = 3.0 * s.noise_sigma / (n as f64).sqrt();
        let mut violations = 0;
        let mut checks = 0;
        for c in 0..s.num_classes() {
            for d in 0..s.num_domains() {
                let idx: Vec<usize> = (0..ds.len())
                    .filter(|&i| ds.class_labels[i] == c && ds.domain_labels[i] == d)
                    .collect();
                assert_eq!(idx.len(), n);
                let mean = s.cell_mean(c, d);
                for k in 0..s.feature_dim {
                    let emp = idx.iter().map(|&i| ds.features[(i, k)]).sum::<f64>() / n as f64;
                    checks += 1;
                    if (emp - mean[k]).abs() > bound {
                        violations += 1;
                    }
                }
            }
        }
        // 3-sigma: expect ~0.27% of coordinates outside
        assert!(violations * 100 <= checks, "{violations}/{checks}");
    }

    #[test]
    fn deterministic_per_seed() {
        let s = spec(1.0, 4.0, 0.5);
        assert_eq!(sample_dataset(&s, 5, 3).unwrap(), sample_dataset(&s, 5, 3).unwrap());
        assert_ne!(sample_dataset(&s, 5, 3).unwrap(), sample_dataset(&s, 5, 4).unwrap());
    }

    #[test]
    fn invalid_spec_rejected() {
        let mut s = spec(1.0, 4.0, 0.5);
        assert!(sample_dataset(&s, 0, 1).is_err());
        s.noise_sigma = 0.0;
        assert!(sample_dataset(&s, 1, 1).is_err());
        let mut s = spec(1.0, 4.0, 0.5);
        s.class_means[0].pop();
        assert!(s.validate().is_err());
    }
}
