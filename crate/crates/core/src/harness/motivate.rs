use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{derive_seed, TrainConfig};
use super::export::export_embeddings;
use crate::diffcore::ModelParams;
use crate::domain_model::{dominance_report, sample_dataset, DominanceReport, MixtureConfig};
use crate::error::Result;
use crate::metrics::{dispersion_report, DispersionReport};

const TAG_MOTIVATE_DATA: u64 = 11;
const TAG_MOTIVATE_INIT: u64 = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSweepPoint {
    pub domain_scale: f64,
    pub dominance: DominanceReport,
    pub untrained_dispersion: DispersionReport,
}

/// Domain dominance of the raw data and cluster structure of an untrained encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotivateReport {
    pub seed: u64,
    pub dominance: DominanceReport,
    pub input_dispersion: DispersionReport,
    pub untrained_dispersion: DispersionReport,
    pub domain_scale_sweep: Vec<ScaleSweepPoint>,
}

fn untrained_point(cfg: &TrainConfig, mixture: &MixtureConfig) -> Result<(DominanceReport, DispersionReport, DispersionReport)> {
    let spec = mixture.build(cfg.seed)?;
    let data = sample_dataset(&spec, cfg.n_per_cell, derive_seed(cfg.seed, TAG_MOTIVATE_DATA))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, TAG_MOTIVATE_INIT));
    let model = ModelParams::init(&cfg.encoder_dims(), spec.num_classes(), &mut rng)?;
    let emb = export_embeddings(&model, &cfg.loss, &data)?;
    Ok((
        dominance_report(&data, 2.0)?,
        dispersion_report(&data.features, &data.class_labels, &data.domain_labels, cfg.knn_k)?,
        dispersion_report(&emb.features, &emb.class_labels, &emb.domain_labels, cfg.knn_k)?,
    ))
}

/// Runs on `cfg.mixture`, then sweeps the domain scale over `{0, 1, 2, 4, 8}`.
pub fn motivate(cfg: &TrainConfig) -> Result<MotivateReport> {
    cfg.validate()?;
    let (dominance, input_dispersion, untrained_dispersion) = untrained_point(cfg, &cfg.mixture)?;
    let domain_scale_sweep = [0.0, 1.0, 2.0, 4.0, 8.0]
        .into_iter()
        .map(|s| {
            let mixture = MixtureConfig {
                domain_scale: s,
                ..cfg.mixture.clone()
            };
            let (dominance, _, untrained_dispersion) = untrained_point(cfg, &mixture)?;
            Ok(ScaleSweepPoint {
                domain_scale: s,
                dominance,
                untrained_dispersion,
            })
        })
        .collect::<Result<_>>()?;
    Ok(MotivateReport {
        seed: cfg.seed,
        dominance,
        input_dispersion,
        untrained_dispersion,
        domain_scale_sweep,
    })
}
