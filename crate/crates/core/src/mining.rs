//! Triplet construction under class-only and domain-class candidate rules.
//!
//! Under [`MiningPolicy::DomainClass`] a positive shares the anchor's class but
//! comes from another domain, and a negative shares the anchor's domain but has
//! another class. The domain constraint is hard: an anchor with no such
//! candidate is marked invalid rather than falling back to any-domain pairs.

use serde::{Deserialize, Serialize};

use crate::diffcore::Matrix;
use crate::error::{DctError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiningPolicy {
    Standard,
    DomainClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    BatchHard,
    BatchAll,
}

/// Square boolean matrix, row `i` lists the candidates for anchor `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    n: usize,
    data: Vec<bool>,
}

impl Mask {
    fn from_fn(n: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn row_count(&self, i: usize) -> usize {
        self.row(i).iter().filter(|&&b| b).count()
    }

    /// True when every set entry of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.n == other.n && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateMasks {
    pub positive: Mask,
    pub negative: Mask,
    pub policy: MiningPolicy,
}

pub fn candidate_masks(
    class_labels: &[usize],
    domain_labels: &[usize],
    policy: MiningPolicy,
) -> Result<CandidateMasks> {
    let n = class_labels.len();
    if domain_labels.len() != n {
        return Err(DctError::ShapeMismatch {
            context: "candidate_masks labels".into(),
            expected: (n, 1),
            got: (domain_labels.len(), 1),
        });
    }
    let c = class_labels;
    let d = domain_labels;
    let (positive, negative) = match policy {
        MiningPolicy::Standard => (
            Mask::from_fn(n, |i, j| i != j && c[i] == c[j]),
            Mask::from_fn(n, |i, j| c[i] != c[j]),
        ),
        MiningPolicy::DomainClass => (
            Mask::from_fn(n, |i, j| i != j && c[i] == c[j] && d[i] != d[j]),
            Mask::from_fn(n, |i, j| c[i] != c[j] && d[i] == d[j]),
        ),
    };
    Ok(CandidateMasks {
        positive,
        negative,
        policy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Mined triplets plus per-anchor validity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletSet {
    pub triplets: Vec<Triplet>,
    pub anchor_valid: Vec<bool>,
    pub policy: MiningPolicy,
    pub selection: Selection,
}

impl TripletSet {
    pub fn valid_anchor_count(&self) -> usize {
        self.anchor_valid.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }
}

/// Farthest positive and nearest negative per anchor; ties go to the lowest index.
pub fn batch_hard_select(dist: &Matrix, masks: &CandidateMasks) -> Result<TripletSet> {
    let n = masks.positive.len();
    dist.ensure_shape((n, n), "batch_hard_select distances")?;
    let mut triplets = Vec::with_capacity(n);
    let mut anchor_valid = vec![false; n];
    for (a, valid) in anchor_valid.iter_mut().enumerate() {
        let mut hardest_pos: Option<usize> = None;
        let mut hardest_neg: Option<usize> = None;
        for j in 0..n {
            let d = dist[(a, j)];
            if masks.positive.get(a, j) && hardest_pos.is_none_or(|p| d > dist[(a, p)]) {
                hardest_pos = Some(j);
            }
            if masks.negative.get(a, j) && hardest_neg.is_none_or(|q| d < dist[(a, q)]) {
                hardest_neg = Some(j);
            }
        }
        if let (Some(positive), Some(negative)) = (hardest_pos, hardest_neg) {
            *valid = true;
            triplets.push(Triplet {
                anchor: a,
                positive,
                negative,
            });
        }
    }
    Ok(TripletSet {
        triplets,
        anchor_valid,
        policy: masks.policy,
        selection: Selection::BatchHard,
    })
}

/// Every valid `(a, p, n)` combination, ordered by anchor, then positive, then negative.
pub fn batch_all_expand(masks: &CandidateMasks) -> TripletSet {
    let n = masks.positive.len();
    let mut triplets = Vec::new();
    let mut anchor_valid = vec![false; n];
    for (a, valid) in anchor_valid.iter_mut().enumerate() {
        let before = triplets.len();
        for p in (0..n).filter(|&p| masks.positive.get(a, p)) {
            for q in (0..n).filter(|&q| masks.negative.get(a, q)) {
                triplets.push(Triplet {
                    anchor: a,
                    positive: p,
                    negative: q,
                });
            }
        }
        *valid = triplets.len() > before;
    }
    TripletSet {
        triplets,
        anchor_valid,
        policy: masks.policy,
        selection: Selection::BatchAll,
    }
}

/// Counts of anchors lacking domain-class candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub anchors: usize,
    pub missing_positive: usize,
    pub missing_negative: usize,
    /// Anchors lacking either a positive or a negative.
    pub infeasible: usize,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.infeasible == 0
    }
}

pub fn batch_feasibility_report(class_labels: &[usize], domain_labels: &[usize]) -> Result<FeasibilityReport> {
    let masks = candidate_masks(class_labels, domain_labels, MiningPolicy::DomainClass)?;
    let n = class_labels.len();
    let mut report = FeasibilityReport {
        anchors: n,
        missing_positive: 0,
        missing_negative: 0,
        infeasible: 0,
    };
    for i in 0..n {
        let no_pos = masks.positive.row_count(i) == 0;
        let no_neg = masks.negative.row_count(i) == 0;
        report.missing_positive += no_pos as usize;
        report.missing_negative += no_neg as usize;
        report.infeasible += (no_pos || no_neg) as usize;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::pairwise_sq_distances;
    use proptest::prelude::*;

    // class, domain for a 2x2 fully crossed batch
    const CLASSES: [usize; 4] = [0, 0, 1, 1];
    const DOMAINS: [usize; 4] = [0, 1, 0, 1];

    #[test]
    fn crossed_batch_has_one_candidate_each() {
        let m = candidate_masks(&CLASSES, &DOMAINS, MiningPolicy::DomainClass).unwrap();
        for i in 0..4 {
            assert_eq!(m.positive.row_count(i), 1);
            assert_eq!(m.negative.row_count(i), 1);
        }
        // anchor 0 = (c0, d0): positive (c0, d1) = 1, negative (c1, d0) = 2
        assert!(m.positive.get(0, 1) && m.negative.get(0, 2));
    }

    #[test]
    fn single_domain_has_no_dc_positive() {
        let m = candidate_masks(&[0, 0, 1, 1, 2], &[3; 5], MiningPolicy::DomainClass).unwrap();
        assert!((0..5).all(|i| m.positive.row_count(i) == 0));
    }

    #[test]
    fn standard_ignores_domains() {
        let classes = [0, 1, 1, 2, 0, 2];
        let a = candidate_masks(&classes, &[0, 1, 2, 0, 1, 2], MiningPolicy::Standard).unwrap();
        let b = candidate_masks(&classes, &[2, 2, 0, 1, 0, 1], MiningPolicy::Standard).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(candidate_masks(&[0, 1], &[0], MiningPolicy::Standard).is_err());
    }

    #[test]
    fn hardest_positive_is_farthest() {
        // anchor 0; positives 1 (d=1) and 2 (d=5); negative 3
        let dist = Matrix::from_rows(&[
            [0.0, 1.0, 5.0, 2.0],
            [1.0, 0.0, 4.0, 3.0],
            [5.0, 4.0, 0.0, 6.0],
            [2.0, 3.0, 6.0, 0.0],
        ])
        .unwrap();
        let m = candidate_masks(&[0, 0, 0, 1], &[0, 0, 0, 0], MiningPolicy::Standard).unwrap();
        let t = batch_hard_select(&dist, &m).unwrap();
        assert_eq!(
            t.triplets[0],
            Triplet {
                anchor: 0,
                positive: 2,
                negative: 3
            }
        );
        // anchor 3 has no positive
        assert!(!t.anchor_valid[3]);
        assert_eq!(t.valid_anchor_count(), 3);
    }

    #[test]
    fn anchor_without_negative_is_invalid() {
        let dist = pairwise_sq_distances(&Matrix::from_fn(3, 2, |r, c| (r + c) as f64));
        let m = candidate_masks(&[0, 0, 0], &[0, 1, 2], MiningPolicy::Standard).unwrap();
        let t = batch_hard_select(&dist, &m).unwrap();
        assert!(t.anchor_valid.iter().all(|&v| !v));
        assert!(t.is_empty());
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let dist = Matrix::from_rows(&[[0.0, 1.0, 1.0, 2.0, 2.0]; 5]).unwrap();
        let m = candidate_masks(&[0, 0, 0, 1, 1], &[0; 5], MiningPolicy::Standard).unwrap();
        let t = batch_hard_select(&dist, &m).unwrap();
        assert_eq!(t.triplets[0].positive, 1);
        assert_eq!(t.triplets[0].negative, 3);
    }

    #[test]
    fn batch_all_counts() {
        let m = candidate_masks(&CLASSES, &DOMAINS, MiningPolicy::DomainClass).unwrap();
        assert_eq!(batch_all_expand(&m).triplets.len(), 4);

        let classes: Vec<usize> = (0..8).map(|i| i / 4).collect();
        let m = candidate_masks(&classes, &[0; 8], MiningPolicy::Standard).unwrap();
        assert_eq!(batch_all_expand(&m).triplets.len(), 96);

        let m = candidate_masks(&[0, 1], &[0, 1], MiningPolicy::DomainClass).unwrap();
        let t = batch_all_expand(&m);
        assert!(t.is_empty() && t.anchor_valid.iter().all(|&v| !v));
    }

    #[test]
    fn feasibility_of_crossed_and_single_domain_batches() {
        let r = batch_feasibility_report(&CLASSES, &DOMAINS).unwrap();
        assert!(r.is_feasible());
        let r = batch_feasibility_report(&[0, 0, 1, 1], &[0; 4]).unwrap();
        assert_eq!(r.missing_positive, 4);
        assert_eq!(r.missing_negative, 0);
        assert_eq!(r.infeasible, 4);
    }

    fn labels(max: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
        (1usize..16).prop_flat_map(move |n| {
            (
                proptest::collection::vec(0..max, n),
                proptest::collection::vec(0..max, n),
            )
        })
    }

    proptest! {
        #[test]
        fn dc_masks_refine_standard((c, d) in labels(4)) {
            let std = candidate_masks(&c, &d, MiningPolicy::Standard).unwrap();
            let dc = candidate_masks(&c, &d, MiningPolicy::DomainClass).unwrap();
            prop_assert!(dc.positive.is_subset_of(&std.positive));
            prop_assert!(dc.negative.is_subset_of(&std.negative));
        }

        #[test]
        fn dc_masks_invariant_under_domain_relabeling((c, d) in labels(4), perm in Just([2usize, 0, 3, 1])) {
            let relabeled: Vec<usize> = d.iter().map(|&x| perm[x]).collect();
            let a = candidate_masks(&c, &d, MiningPolicy::DomainClass).unwrap();
            let b = candidate_masks(&c, &relabeled, MiningPolicy::DomainClass).unwrap();
            prop_assert_eq!(a.positive, b.positive);
            prop_assert_eq!(a.negative, b.negative);
        }

        #[test]
        fn batch_hard_is_scale_invariant(
            (c, d) in labels(3),
            seed in any::<u64>(),
            scale in 0.01f64..100.0,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x = Matrix::from_fn(c.len(), 3, |_, _| rng.random_range(-1.0..1.0));
            let dist = pairwise_sq_distances(&x);
            let masks = candidate_masks(&c, &d, MiningPolicy::DomainClass).unwrap();
            let a = batch_hard_select(&dist, &masks).unwrap();
            let b = batch_hard_select(&dist.map(|v| v * scale), &masks).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
