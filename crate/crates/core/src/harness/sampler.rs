use std::cmp::Reverse;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{DctError, Result};
use crate::mining::MiningPolicy;

/// Classes of the next batch and, under the domain-class policy, `(domain, quota)` pairs.
type BatchPlan = (Vec<usize>, Vec<(usize, usize)>);

/// P classes × K samples batch sampler, without replacement within an epoch.
///
/// Under [`MiningPolicy::DomainClass`] every batch draws all its classes from
/// the same set of `m = min(K, #domains)` domains, spreading each class's K
/// samples across them. Each class then has samples in at least two domains
/// and every sample has a same-domain sample of another class, so no anchor
/// lacks a domain-class positive or negative. Under
/// [`MiningPolicy::Standard`] it is plain P×K sampling.
#[derive(Debug, Clone)]
pub struct PkSampler {
    classes_per_batch: usize,
    samples_per_class: usize,
    policy: MiningPolicy,
    /// `cells[c][d]`: dataset rows with class `c` and domain `d`.
    cells: Vec<Vec<Vec<usize>>>,
    rng: ChaCha8Rng,
}

impl PkSampler {
    pub fn new(
        class_labels: &[usize],
        domain_labels: &[usize],
        classes_per_batch: usize,
        samples_per_class: usize,
        policy: MiningPolicy,
        seed: u64,
    ) -> Result<Self> {
        if class_labels.len() != domain_labels.len() {
            return Err(DctError::InfeasibleSampler("label lengths differ".into()));
        }
        if classes_per_batch < 2 || samples_per_class < 2 {
            return Err(DctError::InfeasibleSampler(format!(
                "need P >= 2 and K >= 2, got P = {classes_per_batch}, K = {samples_per_class}"
            )));
        }
        let num_classes = class_labels.iter().max().map_or(0, |m| m + 1);
        let num_domains = domain_labels.iter().max().map_or(0, |m| m + 1);
        let mut cells = vec![vec![Vec::new(); num_domains]; num_classes];
        for (i, (&c, &d)) in class_labels.iter().zip(domain_labels).enumerate() {
            cells[c][d].push(i);
        }
        let sampler = Self {
            classes_per_batch,
            samples_per_class,
            policy,
            cells,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let counts = sampler.full_counts();
        let first = match policy {
            MiningPolicy::Standard => sampler.plan_standard(&counts, &mut sampler.rng.clone()),
            MiningPolicy::DomainClass => sampler.plan_domain_class(&counts, &mut sampler.rng.clone()),
        };
        if first.is_none() {
            return Err(DctError::InfeasibleSampler(format!(
                "cannot form a single {policy:?} batch of {classes_per_batch} classes x {samples_per_class} samples"
            )));
        }
        Ok(sampler)
    }

    pub fn batch_size(&self) -> usize {
        self.classes_per_batch * self.samples_per_class
    }

    fn full_counts(&self) -> Vec<Vec<usize>> {
        self.cells
            .iter()
            .map(|row| row.iter().map(Vec::len).collect())
            .collect()
    }

    /// Domains with samples, and for DC the per-domain quota of each class.
    fn plan_domain_class(&self, counts: &[Vec<usize>], rng: &mut ChaCha8Rng) -> Option<BatchPlan> {
        let num_domains = counts.first().map_or(0, Vec::len);
        let present: Vec<usize> = (0..num_domains)
            .filter(|&d| counts.iter().any(|row| row[d] > 0))
            .collect();
        let m = self.samples_per_class.min(present.len());
        if m < 2 {
            return None;
        }
        let base = self.samples_per_class / m;
        let extra = self.samples_per_class % m;
        let p = self.classes_per_batch;

        // rank domains by how many classes can still give base+1 samples, then by volume
        let mut domains = present;
        domains.shuffle(rng);
        let score = |d: usize| {
            let able = counts.iter().filter(|row| row[d] > base).count();
            let total: usize = counts.iter().map(|row| row[d]).sum();
            (able, total)
        };
        domains.sort_by_key(|&d| Reverse(score(d)));
        let chosen: Vec<(usize, usize)> = domains
            .into_iter()
            .take(m)
            .enumerate()
            .map(|(i, d)| (d, base + usize::from(i < extra)))
            .collect();

        let mut classes: Vec<usize> = (0..counts.len())
            .filter(|&c| chosen.iter().all(|&(d, q)| counts[c][d] >= q))
            .collect();
        if classes.len() < p {
            return None;
        }
        classes.shuffle(rng);
        let volume = |c: usize| chosen.iter().map(|&(d, _)| counts[c][d]).sum::<usize>();
        classes.sort_by_key(|&c| Reverse(volume(c)));
        classes.truncate(p);
        Some((classes, chosen))
    }

    fn plan_standard(&self, counts: &[Vec<usize>], rng: &mut ChaCha8Rng) -> Option<BatchPlan> {
        let total = |c: usize| counts[c].iter().sum::<usize>();
        let mut classes: Vec<usize> = (0..counts.len())
            .filter(|&c| total(c) >= self.samples_per_class)
            .collect();
        if classes.len() < self.classes_per_batch {
            return None;
        }
        classes.shuffle(rng);
        classes.sort_by_key(|&c| Reverse(total(c)));
        classes.truncate(self.classes_per_batch);
        Some((classes, Vec::new()))
    }

    /// One epoch of batches; each batch lists dataset row indices, grouped by class.
    pub fn epoch(&mut self) -> Vec<Vec<usize>> {
        let mut rng = self.rng.clone();
        // shuffled pools: per cell for DC, per class for standard
        let mut pools: Vec<Vec<Vec<usize>>> = match self.policy {
            MiningPolicy::DomainClass => self.cells.clone(),
            MiningPolicy::Standard => self.cells.iter().map(|row| vec![row.concat()]).collect(),
        };
        for pool in pools.iter_mut().flatten() {
            pool.shuffle(&mut rng);
        }
        let mut batches = Vec::new();
        loop {
            let counts: Vec<Vec<usize>> = pools.iter().map(|row| row.iter().map(Vec::len).collect()).collect();
            let plan = match self.policy {
                MiningPolicy::Standard => self.plan_standard(&counts, &mut rng),
                MiningPolicy::DomainClass => self.plan_domain_class(&counts, &mut rng),
            };
            let Some((classes, quotas)) = plan else { break };
            let mut batch = Vec::with_capacity(self.batch_size());
            for &c in &classes {
                match self.policy {
                    MiningPolicy::Standard => {
                        let pool = &mut pools[c][0];
                        batch.extend(pool.drain(pool.len() - self.samples_per_class..));
                    }
                    MiningPolicy::DomainClass => {
                        for &(d, q) in &quotas {
                            let pool = &mut pools[c][d];
                            batch.extend(pool.drain(pool.len() - q..));
                        }
                    }
                }
            }
            batches.push(batch);
        }
        self.rng = rng;
        batches
    }
}
