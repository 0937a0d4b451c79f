use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffcore::SgdConfig;
use crate::domain_model::MixtureConfig;
use crate::error::{DctError, Result};
use crate::losses::LossConfig;
use crate::mining::MiningPolicy;

/// `P` classes times `K` samples per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSpec {
    pub classes_per_batch: usize,
    pub samples_per_class: usize,
}

impl Default for BatchSpec {
    fn default() -> Self {
        Self {
            classes_per_batch: 4,
            samples_per_class: 6,
        }
    }
}

impl BatchSpec {
    pub fn size(&self) -> usize {
        self.classes_per_batch * self.samples_per_class
    }
}

/// Everything one training run needs. Loaded from TOML; missing keys take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mixture: MixtureConfig,
    pub loss: LossConfig,
    pub batch: BatchSpec,
    /// Encoder widths after the input layer; the last entry is the embedding dimension.
    pub encoder_layers: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub held_out_domain: Option<usize>,
    pub eval_every: usize,
    pub n_per_cell: usize,
    /// Per-cell size of the independently drawn source-domain probe set.
    pub probe_per_cell: usize,
    pub knn_k: usize,
    /// Number of trial seeds (`seed`, `seed + 1`, ...) for leave-one-domain-out.
    pub trials: usize,
    pub margins: Vec<f64>,
    pub out_dir: Option<String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mixture: MixtureConfig::default(),
            loss: LossConfig::default(),
            batch: BatchSpec::default(),
            encoder_layers: vec![64, 32],
            epochs: 100,
            lr: 0.05,
            momentum: 0.9,
            weight_decay: 1e-4,
            seed: 0,
            held_out_domain: None,
            eval_every: 10,
            n_per_cell: 50,
            probe_per_cell: 20,
            knn_k: 10,
            trials: 3,
            margins: vec![0.0, 1.0, 5.0, 15.0],
            out_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: TrainConfig =
            toml::from_str(text).map_err(|e| DctError::InvalidConfig(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| DctError::InvalidConfig(format!("config serialize: {e}")))
    }

    pub fn sgd(&self) -> SgdConfig {
        SgdConfig {
            lr: self.lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
        }
    }

    pub fn encoder_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.mixture.feature_dim];
        dims.extend(&self.encoder_layers);
        dims
    }

    pub fn source_domains(&self) -> Vec<usize> {
        (0..self.mixture.num_domains)
            .filter(|&d| Some(d) != self.held_out_domain)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DctError::InvalidConfig(m));
        self.loss.validate()?;
        self.sgd().validate()?;
        let BatchSpec {
            classes_per_batch: p,
            samples_per_class: k,
        } = self.batch;
        if p < 2 || k < 2 {
            return bad(format!("batch needs P >= 2 and K >= 2, got P = {p}, K = {k}"));
        }
        if p > self.mixture.num_classes {
            return bad(format!("P = {p} exceeds the {} classes", self.mixture.num_classes));
        }
        if self.encoder_layers.is_empty() || self.encoder_layers.contains(&0) {
            return bad("encoder_layers needs at least one positive width".into());
        }
        if self.n_per_cell == 0 || self.probe_per_cell == 0 {
            return bad("n_per_cell and probe_per_cell must be positive".into());
        }
        if self.eval_every == 0 || self.knn_k == 0 || self.trials == 0 {
            return bad("eval_every, knn_k and trials must be positive".into());
        }
        if let Some(d) = self.held_out_domain {
            if d >= self.mixture.num_domains {
                return bad(format!("held_out_domain {d} >= num_domains {}", self.mixture.num_domains));
            }
        }
        let sources = self.source_domains().len();
        if sources == 0 {
            return bad("no source domain left for training".into());
        }
        if self.loss.policy == MiningPolicy::DomainClass && self.loss.dct_weight > 0.0 && sources < 2 {
            return bad(format!("domain-class mining needs >= 2 source domains, have {sources}"));
        }
        if self.margins.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return bad("margins must be finite and >= 0".into());
        }
        Ok(())
    }
}

/// Independent stream seed for `(seed, tag)` via splitmix64.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(TrainConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = TrainConfig::from_toml_str(
            "epochs = 3\nheld_out_domain = 1\n[loss]\nmargin = 2.5\npolicy = \"standard\"\n[mixture]\ndomain_scale = 0.0\n",
        )
        .unwrap();
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.loss.margin, 2.5);
        assert_eq!(cfg.loss.policy, MiningPolicy::Standard);
        assert_eq!(cfg.mixture.domain_scale, 0.0);
        assert_eq!(cfg.batch, BatchSpec::default());
        assert_eq!(cfg.source_domains(), vec![0, 2, 3]);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(TrainConfig::from_toml_str("unknown_key = 1").is_err());
        assert!(TrainConfig::from_toml_str("held_out_domain = 9").is_err());
        assert!(TrainConfig::from_toml_str("[batch]\nclasses_per_batch = 1\nsamples_per_class = 4").is_err());
        assert!(TrainConfig::from_toml_str("momentum = 1.0").is_err());
        // one source domain left: no cross-domain positives
        assert!(TrainConfig::from_toml_str("held_out_domain = 0\n[mixture]\nnum_domains = 2").is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 1), derive_seed(1, 2));
        assert_ne!(derive_seed(1, 1), derive_seed(2, 1));
        assert_eq!(derive_seed(5, 3), derive_seed(5, 3));
    }
}
