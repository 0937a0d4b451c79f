//! Triplet hinge, domain-class triplet loss and the combined training objective.

use serde::{Deserialize, Serialize};

use crate::diffcore::{pairwise_sq_distances, softmax_cross_entropy, Matrix, ModelParams, ParamGrads};
use crate::embedding_space::{
    feature_normalize_backward, feature_normalize_forward, nobias_bn_backward, nobias_bn_train,
};
use crate::error::{DctError, Result};
use crate::mining::{batch_all_expand, batch_hard_select, candidate_masks, MiningPolicy, Selection};

/// Squared distances are clamped to this before the square root.
pub const MIN_SQ_DISTANCE: f64 = 1e-12;

/// Which features feed the classifier head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierInput {
    BeforeBn,
    AfterBn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub margin: f64,
    pub policy: MiningPolicy,
    pub selection: Selection,
    pub use_bn: bool,
    /// Feature normalization of the triplet features, applied after batch norm.
    pub use_fn: bool,
    pub classifier_input: ClassifierInput,
    pub dct_weight: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            margin: 1.0,
            policy: MiningPolicy::DomainClass,
            selection: Selection::BatchHard,
            use_bn: true,
            use_fn: false,
            classifier_input: ClassifierInput::AfterBn,
            dct_weight: 1.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return Err(DctError::InvalidConfig(format!("margin {} must be finite and >= 0", self.margin)));
        }
        if !(self.dct_weight.is_finite() && self.dct_weight >= 0.0) {
            return Err(DctError::InvalidConfig(format!("dct_weight {} must be >= 0", self.dct_weight)));
        }
        Ok(())
    }
}

/// `max(0, d_ap − d_an + τ)`.
#[inline]
pub fn triplet_hinge(d_ap: f64, d_an: f64, margin: f64) -> f64 {
    (d_ap - d_an + margin).max(0.0)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DctStats {
    pub valid_triplets: usize,
    pub active_triplets: usize,
    pub active_fraction: f64,
    pub mean_d_ap: f64,
    pub mean_d_an: f64,
    /// Set when the batch produced no valid triplet; loss and gradient are then zero.
    pub no_valid_triplets: bool,
}

#[inline]
fn clamped_distance(sq: f64) -> (f64, bool) {
    if sq > MIN_SQ_DISTANCE {
        (sq.sqrt(), true)
    } else {
        (MIN_SQ_DISTANCE.sqrt(), false)
    }
}

/// Adds `scale · ∂‖x_i − x_j‖/∂x` into `grad` rows `i` and `j`.
fn accumulate_distance_grad(grad: &mut Matrix, emb: &Matrix, i: usize, j: usize, dist: f64, scale: f64) {
    let s = scale / dist;
    for k in 0..emb.cols() {
        let diff = (emb[(i, k)] - emb[(j, k)]) * s;
        grad[(i, k)] += diff;
        grad[(j, k)] -= diff;
    }
}

/// Mean triplet hinge over mined triplets on Euclidean distances, with its
/// gradient w.r.t. the embeddings.
///
/// The denominator is the number of mined triplets: valid anchors under
/// batch-hard, valid combinations under batch-all. At the hinge kink the
/// zero branch is taken.
pub fn dct_loss(
    embeddings: &Matrix,
    class_labels: &[usize],
    domain_labels: &[usize],
    cfg: &LossConfig,
) -> Result<(f64, Matrix, DctStats)> {
    let n = embeddings.rows();
    if class_labels.len() != n {
        return Err(DctError::ShapeMismatch {
            context: "dct_loss labels".into(),
            expected: (n, 1),
            got: (class_labels.len(), 1),
        });
    }
    let sq = pairwise_sq_distances(embeddings);
    let masks = candidate_masks(class_labels, domain_labels, cfg.policy)?;
    let set = match cfg.selection {
        Selection::BatchHard => batch_hard_select(&sq, &masks)?,
        Selection::BatchAll => batch_all_expand(&masks),
    };
    let mut grad = Matrix::zeros(n, embeddings.cols());
    if set.triplets.is_empty() {
        return Ok((
            0.0,
            grad,
            DctStats {
                no_valid_triplets: true,
                ..DctStats::default()
            },
        ));
    }
    let inv = 1.0 / set.triplets.len() as f64;
    let mut loss = 0.0;
    let mut active = 0;
    let (mut sum_ap, mut sum_an) = (0.0, 0.0);
    for t in &set.triplets {
        let (d_ap, ap_smooth) = clamped_distance(sq[(t.anchor, t.positive)]);
        let (d_an, an_smooth) = clamped_distance(sq[(t.anchor, t.negative)]);
        sum_ap += d_ap;
        sum_an += d_an;
        let h = triplet_hinge(d_ap, d_an, cfg.margin);
        if h > 0.0 {
            loss += h;
            active += 1;
            if ap_smooth {
                accumulate_distance_grad(&mut grad, embeddings, t.anchor, t.positive, d_ap, inv);
            }
            if an_smooth {
                accumulate_distance_grad(&mut grad, embeddings, t.anchor, t.negative, d_an, -inv);
            }
        }
    }
    let count = set.triplets.len();
    Ok((
        loss * inv,
        grad,
        DctStats {
            valid_triplets: count,
            active_triplets: active,
            active_fraction: active as f64 / count as f64,
            mean_d_ap: sum_ap * inv,
            mean_d_an: sum_an * inv,
            no_valid_triplets: false,
        },
    ))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub cross_entropy: f64,
    pub dct: f64,
    pub stats: DctStats,
}

#[derive(Debug, Clone)]
pub struct TotalLossOutput {
    pub loss: LossBreakdown,
    pub grads: ParamGrads,
    /// Batch mean and variance seen by batch norm, for the running-stat update.
    pub bn_batch_stats: Option<(Vec<f64>, Vec<f64>)>,
}

/// Cross-entropy on the classifier plus `dct_weight` times the triplet loss on
/// the (normalized) triplet features, with one backward pass through the
/// shared encoder. Batch norm runs in train mode; running statistics are not
/// touched here, the caller folds in `bn_batch_stats`.
pub fn total_loss(
    params: &ModelParams,
    batch: &Matrix,
    class_labels: &[usize],
    domain_labels: &[usize],
    cfg: &LossConfig,
) -> Result<TotalLossOutput> {
    let (features, tape) = params.encoder.forward(batch)?;

    let bn = if cfg.use_bn {
        Some(nobias_bn_train(&params.bn.gamma, params.bn.eps, &features)?)
    } else {
        None
    };
    let normalized = bn.as_ref().map_or(&features, |(out, _)| out);
    let classifier_in = match cfg.classifier_input {
        ClassifierInput::AfterBn => normalized,
        ClassifierInput::BeforeBn => &features,
    };

    let logits = params.classifier.forward(classifier_in)?;
    let (ce, grad_logits) = softmax_cross_entropy(&logits, class_labels)?;
    let (grad_cls_in, classifier_grads) = params.classifier.backward(classifier_in, &grad_logits)?;

    // gradient w.r.t. the batch-norm output (or raw features without BN)
    let mut grad_normalized = Matrix::zeros(features.rows(), features.cols());
    let mut dct = 0.0;
    let mut stats = DctStats::default();
    if cfg.dct_weight > 0.0 {
        let fn_out = if cfg.use_fn {
            Some(feature_normalize_forward(normalized)?)
        } else {
            None
        };
        let triplet_features = fn_out.as_ref().map_or(normalized, |(u, _)| u);
        let (l, mut g, s) = dct_loss(triplet_features, class_labels, domain_labels, cfg)?;
        g.scale(cfg.dct_weight);
        if let Some((_, cache)) = &fn_out {
            g = feature_normalize_backward(cache, &g)?;
        }
        grad_normalized = g;
        dct = l;
        stats = s;
    }

    let mut gamma_grad = vec![0.0; params.bn.dim()];
    let mut bn_batch_stats = None;
    let grad_features = match &bn {
        Some((_, cache)) => {
            if cfg.classifier_input == ClassifierInput::AfterBn {
                grad_normalized.add_assign(&grad_cls_in)?;
            }
            let (mut gf, gg) = nobias_bn_backward(cache, &grad_normalized)?;
            if cfg.classifier_input == ClassifierInput::BeforeBn {
                gf.add_assign(&grad_cls_in)?;
            }
            gamma_grad = gg;
            bn_batch_stats = Some((cache.batch_mean.clone(), cache.batch_var.clone()));
            gf
        }
        None => {
            grad_normalized.add_assign(&grad_cls_in)?;
            grad_normalized
        }
    };
    let (encoder_grads, _) = params.encoder.backward(&tape, &grad_features)?;

    Ok(TotalLossOutput {
        loss: LossBreakdown {
            total: ce + cfg.dct_weight * dct,
            cross_entropy: ce,
            dct,
            stats,
        },
        grads: ParamGrads {
            encoder: encoder_grads,
            gamma: gamma_grad,
            classifier: classifier_grads,
        },
        bn_batch_stats,
    })
}

/// Eval-mode outputs: triplet-space embeddings and classifier logits.
#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub embeddings: Matrix,
    pub logits: Matrix,
}

/// Forward pass with batch norm on its running statistics.
pub fn forward_eval(params: &ModelParams, batch: &Matrix, cfg: &LossConfig) -> Result<EvalOutput> {
    let (features, _) = params.encoder.forward(batch)?;
    let normalized = if cfg.use_bn {
        params.bn.forward_eval(&features)?
    } else {
        features.clone()
    };
    let classifier_in = match cfg.classifier_input {
        ClassifierInput::AfterBn => &normalized,
        ClassifierInput::BeforeBn => &features,
    };
    let logits = params.classifier.forward(classifier_in)?;
    let embeddings = if cfg.use_fn {
        feature_normalize_forward(&normalized)?.0
    } else {
        normalized
    };
    Ok(EvalOutput { embeddings, logits })
}
