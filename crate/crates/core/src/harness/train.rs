use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{derive_seed, TrainConfig};
use super::sampler::PkSampler;
use crate::dataset::Dataset;
use crate::diffcore::{ModelParams, Sgd};
use crate::domain_model::{sample_dataset, MixtureSpec};
use crate::error::{DctError, Result};
use crate::losses::{forward_eval, total_loss};
use crate::metrics::{accuracy, dispersion_report, DispersionReport};
use crate::mining::{batch_feasibility_report, MiningPolicy};

const TAG_DATA: u64 = 1;
const TAG_PROBE: u64 = 2;
const TAG_INIT: u64 = 3;
const TAG_SAMPLER: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub source_accuracy: f64,
    pub probe_dispersion: DispersionReport,
}

/// Batch-averaged losses of one epoch, plus evaluation on eval epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub batches: usize,
    pub total_loss: f64,
    pub ce_loss: f64,
    pub dct_loss: f64,
    pub active_fraction: f64,
    pub eval: Option<EvalRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub config: TrainConfig,
    pub epochs: Vec<EpochRecord>,
    pub held_out_domain: Option<usize>,
    pub held_out_accuracy: Option<f64>,
    pub final_source_accuracy: f64,
    pub final_dispersion: DispersionReport,
}

/// A finished run with the state needed to reuse the model.
#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub report: RunReport,
    pub model: ModelParams,
    pub spec: MixtureSpec,
    pub dataset: Dataset,
}

fn evaluate(model: &ModelParams, cfg: &TrainConfig, source: &Dataset, probe: &Dataset) -> Result<EvalRecord> {
    let src = forward_eval(model, &source.features, &cfg.loss)?;
    let pr = forward_eval(model, &probe.features, &cfg.loss)?;
    Ok(EvalRecord {
        source_accuracy: accuracy(&src.logits, &source.class_labels)?,
        probe_dispersion: dispersion_report(&pr.embeddings, &probe.class_labels, &probe.domain_labels, cfg.knn_k)?,
    })
}

/// Trains on all source domains and evaluates on the held-out one.
pub fn train_model(cfg: &TrainConfig) -> Result<TrainedRun> {
    cfg.validate()?;
    let seed = cfg.seed;
    let spec = cfg.mixture.build(seed)?;
    let dataset = sample_dataset(&spec, cfg.n_per_cell, derive_seed(seed, TAG_DATA))?;
    let held_out = cfg.held_out_domain;
    let source = dataset.filter_domains(|d| Some(d) != held_out);
    let target = held_out.map(|h| dataset.filter_domains(|d| d == h));
    let probe = sample_dataset(&spec, cfg.probe_per_cell, derive_seed(seed, TAG_PROBE))?
        .filter_domains(|d| Some(d) != held_out);

    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_INIT));
    let mut model = ModelParams::init(&cfg.encoder_dims(), spec.num_classes(), &mut init_rng)?;
    let mut sampler = PkSampler::new(
        &source.class_labels,
        &source.domain_labels,
        cfg.batch.classes_per_batch,
        cfg.batch.samples_per_class,
        cfg.loss.policy,
        derive_seed(seed, TAG_SAMPLER),
    )?;
    let mut optimizer = Sgd::new(cfg.sgd())?;
    let check_feasible = cfg.loss.policy == MiningPolicy::DomainClass;

    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut last_eval = None;
    for epoch in 0..cfg.epochs {
        let batches = sampler.epoch();
        let mut sums = [0.0; 4];
        for (b, idx) in batches.iter().enumerate() {
            let batch = source.subset(idx);
            if check_feasible {
                let report = batch_feasibility_report(&batch.class_labels, &batch.domain_labels)?;
                if !report.is_feasible() {
                    return Err(DctError::InfeasibleSampler(format!(
                        "epoch {epoch} batch {b}: {} anchors lack domain-class candidates",
                        report.infeasible
                    )));
                }
            }
            let out = total_loss(&model, &batch.features, &batch.class_labels, &batch.domain_labels, &cfg.loss)?;
            if !out.loss.total.is_finite() {
                return Err(DctError::NonFiniteLoss {
                    lr: cfg.lr,
                    epoch,
                    batch: b,
                });
            }
            if let Some((mean, var)) = &out.bn_batch_stats {
                model.bn.absorb_batch_stats(mean, var);
            }
            optimizer.step(&mut model, &out.grads)?;
            sums[0] += out.loss.total;
            sums[1] += out.loss.cross_entropy;
            sums[2] += out.loss.dct;
            sums[3] += out.loss.stats.active_fraction;
        }
        let nb = batches.len().max(1) as f64;
        let is_eval = (epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs;
        let eval = if is_eval {
            Some(evaluate(&model, cfg, &source, &probe)?)
        } else {
            None
        };
        if eval.is_some() {
            last_eval = eval.clone();
        }
        epochs.push(EpochRecord {
            epoch,
            batches: batches.len(),
            total_loss: sums[0] / nb,
            ce_loss: sums[1] / nb,
            dct_loss: sums[2] / nb,
            active_fraction: sums[3] / nb,
            eval,
        });
    }
    let last_eval = match last_eval {
        Some(e) => e,
        None => evaluate(&model, cfg, &source, &probe)?,
    };
    let held_out_accuracy = match &target {
        Some(t) if !t.is_empty() => Some(accuracy(&forward_eval(&model, &t.features, &cfg.loss)?.logits, &t.class_labels)?),
        _ => None,
    };
    Ok(TrainedRun {
        report: RunReport {
            seed,
            config: cfg.clone(),
            epochs,
            held_out_domain: held_out,
            held_out_accuracy,
            final_source_accuracy: last_eval.source_accuracy,
            final_dispersion: last_eval.probe_dispersion,
        },
        model,
        spec,
        dataset,
    })
}

pub fn train(cfg: &TrainConfig) -> Result<RunReport> {
    Ok(train_model(cfg)?.report)
}
