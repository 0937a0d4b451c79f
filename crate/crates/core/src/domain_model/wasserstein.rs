use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{DctError, Result};

/// Empirical `W_p` between two 1-D sample sets.
///
/// Couples the two step quantile functions on the merged grid of their
/// breakpoints, which is exact for empirical measures of any sizes and
/// reduces to the sorted pairing when sizes match.
pub fn wasserstein_1d(samples_a: &[f64], samples_b: &[f64], p: f64) -> Result<f64> {
    if samples_a.is_empty() || samples_b.is_empty() {
        return Err(DctError::EmptyInput("wasserstein_1d samples"));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(DctError::InvalidConfig(format!("moment p = {p} must be >= 1")));
    }
    let mut a = samples_a.to_vec();
    let mut b = samples_b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as u128, b.len() as u128);
    // grid positions in units of 1 / (n m)
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev: u128 = 0;
    let mut acc = 0.0;
    while i < a.len() && j < b.len() {
        let end_a = (i as u128 + 1) * m;
        let end_b = (j as u128 + 1) * n;
        let end = end_a.min(end_b);
        let weight = (end - prev) as f64;
        acc += weight * (a[i] - b[j]).abs().powf(p);
        prev = end;
        if end_a == end {
            i += 1;
        }
        if end_b == end {
            j += 1;
        }
    }
    Ok((acc / (n * m) as f64).powf(1.0 / p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Class,
    Domain,
}

/// Mean over label pairs of the mean over dimensions of 1-D `W_p` between
/// the label-conditional marginals.
pub fn conditional_distance(dataset: &Dataset, kind: LabelKind, p: f64) -> Result<f64> {
    let labels = match kind {
        LabelKind::Class => &dataset.class_labels,
        LabelKind::Domain => &dataset.domain_labels,
    };
    let mut distinct: Vec<usize> = labels.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(DctError::TooFewLabels(distinct.len()));
    }
    let dim = dataset.dim();
    // per label, per dimension marginal samples
    let marginals: Vec<Vec<Vec<f64>>> = distinct
        .iter()
        .map(|&l| {
            let rows: Vec<usize> = (0..dataset.len()).filter(|&i| labels[i] == l).collect();
            (0..dim)
                .map(|k| rows.iter().map(|&i| dataset.features[(i, k)]).collect())
                .collect()
        })
        .collect();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for x in 0..marginals.len() {
        for y in (x + 1)..marginals.len() {
            let mut per_dim = 0.0;
            for (a, b) in marginals[x].iter().zip(&marginals[y]) {
                per_dim += wasserstein_1d(a, b, p)?;
            }
            total += per_dim / dim as f64;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Domain-vs-class conditional distance comparison.
///
/// `ratio = d_domain / d_class`; large values mean domain information
/// dominates distances between samples. This is a sliced-Wasserstein proxy,
/// not a density-level quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub d_domain: f64,
    pub d_class: f64,
    pub ratio: f64,
    pub moment: f64,
    pub proxy: String,
}

pub fn dominance_report(dataset: &Dataset, p: f64) -> Result<DominanceReport> {
    let d_domain = conditional_distance(dataset, LabelKind::Domain, p)?;
    let d_class = conditional_distance(dataset, LabelKind::Class, p)?;
    Ok(DominanceReport {
        d_domain,
        d_class,
        ratio: d_domain / d_class,
        moment: p,
        proxy: "mean pairwise per-dimension 1-D Wasserstein distance between conditional marginals".into(),
    })
}
