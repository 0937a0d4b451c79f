//! Central finite-difference checks for every differentiable operation.
//!
//! Each check draws random configurations, skips draws that land within
//! [`KINK_GAP`] of a non-differentiable point (ReLU zero, hinge boundary,
//! batch-hard argmax/argmin tie), and compares the analytic gradient with
//! central differences. The error of one case is
//! `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖, 1e-6)` over the whole
//! gradient vector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diffcore::{pairwise_sq_distances, softmax_cross_entropy, Activation, Matrix, Mlp, ModelParams};
use crate::embedding_space::{
    feature_normalize_backward, feature_normalize_forward, nobias_bn_backward, nobias_bn_train,
};
use crate::error::Result;
use crate::losses::{dct_loss, total_loss, ClassifierInput, LossConfig};
use crate::mining::{batch_all_expand, batch_hard_select, candidate_masks, MiningPolicy, Selection};

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
pub const KINK_GAP: f64 = 1e-3;
const NORM_FLOOR: f64 = 1e-6;
const MAX_ATTEMPTS_PER_CASE: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpCheck {
    pub op: String,
    pub cases: usize,
    pub skipped_near_kink: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub step: f64,
    pub tolerance: f64,
    pub seed: u64,
    pub checks: Vec<OpCheck>,
}

impl GradCheckReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Relative error between two gradient vectors.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(analytic).max(norm(numeric)).max(NORM_FLOOR)
}

/// Central differences of `f` w.r.t. every entry of `x`.
pub fn numeric_gradient(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut work = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = work[i];
            work[i] = orig + STEP;
            let plus = f(&work);
            work[i] = orig - STEP;
            let minus = f(&work);
            work[i] = orig;
            (plus - minus) / (2.0 * STEP)
        })
        .collect()
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

fn weighted_sum(m: &Matrix, w: &Matrix) -> f64 {
    m.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

fn with_data(shape: (usize, usize), data: &[f64]) -> Matrix {
    Matrix::new(shape.0, shape.1, data.to_vec()).expect("shape preserved")
}

/// Smallest absolute ReLU pre-activation in the encoder for `batch`.
fn min_relu_preactivation(mlp: &Mlp, batch: &Matrix) -> Result<f64> {
    let mut x = batch.clone();
    let mut gap = f64::INFINITY;
    for layer in &mlp.layers {
        let z = layer.linear.forward(&x)?;
        x = match layer.activation {
            Activation::Relu => {
                gap = z.data().iter().fold(gap, |g, v| g.min(v.abs()));
                z.map(|v| v.max(0.0))
            }
            Activation::Identity => z,
        };
    }
    Ok(gap)
}

/// Distance from the triplet loss to its nearest non-differentiable point.
pub fn triplet_kink_gap(emb: &Matrix, classes: &[usize], domains: &[usize], cfg: &LossConfig) -> Result<f64> {
    let sq = pairwise_sq_distances(emb);
    let dist = sq.map(f64::sqrt);
    let masks = candidate_masks(classes, domains, cfg.policy)?;
    let set = match cfg.selection {
        Selection::BatchHard => batch_hard_select(&sq, &masks)?,
        Selection::BatchAll => batch_all_expand(&masks),
    };
    let mut gap = f64::INFINITY;
    for t in &set.triplets {
        let (a, p, n) = (t.anchor, t.positive, t.negative);
        gap = gap.min((dist[(a, p)] - dist[(a, n)] + cfg.margin).abs());
        gap = gap.min(dist[(a, p)]).min(dist[(a, n)]);
        if cfg.selection == Selection::BatchHard {
            for j in 0..classes.len() {
                if j != p && masks.positive.get(a, j) {
                    gap = gap.min((dist[(a, p)] - dist[(a, j)]).abs());
                }
                if j != n && masks.negative.get(a, j) {
                    gap = gap.min((dist[(a, n)] - dist[(a, j)]).abs());
                }
            }
        }
    }
    Ok(gap)
}

struct Runner {
    rng: ChaCha8Rng,
    cases: usize,
}

impl Runner {
    /// Runs `draw` until `cases` smooth draws are checked. `draw` returns
    /// `None` for a near-kink draw, else `(analytic, numeric)`.
    fn run(
        &mut self,
        op: &str,
        mut draw: impl FnMut(&mut ChaCha8Rng) -> Result<Option<(Vec<f64>, Vec<f64>)>>,
    ) -> Result<OpCheck> {
        let mut max_err: f64 = 0.0;
        let mut done = 0;
        let mut skipped = 0;
        let mut attempts = 0;
        while done < self.cases && attempts < self.cases * MAX_ATTEMPTS_PER_CASE {
            attempts += 1;
            match draw(&mut self.rng)? {
                Some((a, n)) => {
                    max_err = max_err.max(relative_error(&a, &n));
                    done += 1;
                }
                None => skipped += 1,
            }
        }
        Ok(OpCheck {
            op: op.to_string(),
            cases: done,
            skipped_near_kink: skipped,
            max_rel_error: max_err,
            passed: done == self.cases && max_err <= TOLERANCE,
        })
    }
}

fn check_linear(rng: &mut ChaCha8Rng) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let (n, i, o) = (rng.random_range(1..8), rng.random_range(1..6), rng.random_range(1..6));
    let mut mlp = Mlp::init(&[i, o], rng)?;
    mlp.layers[0].activation = Activation::Identity;
    let x = random_matrix(rng, n, i, 1.0);
    let w = random_matrix(rng, n, o, 1.0);
    let (_, tape) = mlp.forward(&x)?;
    let (grads, gx) = mlp.backward(&tape, &w)?;
    let mut analytic = grads[0].weight.data().to_vec();
    analytic.extend(&grads[0].bias);
    analytic.extend(gx.data());

    let shape_w = mlp.layers[0].linear.weight.shape();
    let nw = shape_w.0 * shape_w.1;
    let mut flat = mlp.layers[0].linear.weight.data().to_vec();
    flat.extend(&mlp.layers[0].linear.bias);
    flat.extend(x.data());
    let numeric = numeric_gradient(&flat, |v| {
        let mut m = mlp.clone();
        m.layers[0].linear.weight = with_data(shape_w, &v[..nw]);
        m.layers[0].linear.bias = v[nw..nw + o].to_vec();
        let xx = with_data(x.shape(), &v[nw + o..]);
        weighted_sum(&m.forward(&xx).expect("forward").0, &w)
    });
    Ok(Some((analytic, numeric)))
}

fn check_relu_mlp(rng: &mut ChaCha8Rng) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let dims = [rng.random_range(2..5), rng.random_range(3..7), rng.random_range(2..5)];
    let n = rng.random_range(2..7);
    let mlp = Mlp::init(&dims, rng)?;
    let x = random_matrix(rng, n, dims[0], 1.0);
    if min_relu_preactivation(&mlp, &x)? < KINK_GAP {
        return Ok(None);
    }
    let w = random_matrix(rng, n, dims[2], 1.0);
    let (_, tape) = mlp.forward(&x)?;
    let (grads, gx) = mlp.backward(&tape, &w)?;
    let mut analytic: Vec<f64> = Vec::new();
    for g in &grads {
        analytic.extend(g.weight.data());
        analytic.extend(&g.bias);
    }
    analytic.extend(gx.data());

    let mut flat: Vec<f64> = Vec::new();
    for l in &mlp.layers {
        flat.extend(l.linear.weight.data());
        flat.extend(&l.linear.bias);
    }
    flat.extend(x.data());
    let numeric = numeric_gradient(&flat, |v| {
        let mut m = mlp.clone();
        let mut off = 0;
        for l in &mut m.layers {
            let len = l.linear.weight.data().len();
            l.linear.weight.data_mut().copy_from_slice(&v[off..off + len]);
            off += len;
            let bl = l.linear.bias.len();
            l.linear.bias.copy_from_slice(&v[off..off + bl]);
            off += bl;
        }
        let xx = with_data(x.shape(), &v[off..]);
        weighted_sum(&m.forward(&xx).expect("forward").0, &w)
    });
    Ok(Some((analytic, numeric)))
}

fn check_batch_norm(rng: &mut ChaCha8Rng) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let (n, d) = (rng.random_range(2..9), rng.random_range(1..5));
    let x = random_matrix(rng, n, d, 2.0);
    let gamma: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let w = random_matrix(rng, n, d, 1.0);
    let eps = 1e-5;
    let (_, cache) = nobias_bn_train(&gamma, eps, &x)?;
    let (gx, gg) = nobias_bn_backward(&cache, &w)?;
    let mut analytic = gx.data().to_vec();
    analytic.extend(&gg);
    let mut flat = x.data().to_vec();
    flat.extend(&gamma);
    let nx = x.data().len();
    let numeric = numeric_gradient(&flat, |v| {
        let xx = with_data(x.shape(), &v[..nx]);
        weighted_sum(&nobias_bn_train(&v[nx..], eps, &xx).expect("bn").0, &w)
    });
    Ok(Some((analytic, numeric)))
}

fn check_feature_norm(rng: &mut ChaCha8Rng) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let (n, d) = (rng.random_range(1..8), rng.random_range(2..6));
    let x = random_matrix(rng, n, d, 1.5);
    let w = random_matrix(rng, n, d, 1.0);
    let (_, cache) = match feature_normalize_forward(&x) {
        Ok(v) => v,
        Err(_) => return Ok(None),
    };
    let analytic = feature_normalize_backward(&cache, &w)?.into_data();
    let numeric = numeric_gradient(x.data(), |v| {
        weighted_sum(&feature_normalize_forward(&with_data(x.shape(), v)).expect("fn").0, &w)
    });
    Ok(Some((analytic, numeric)))
}

fn random_labels(rng: &mut ChaCha8Rng, n: usize, max: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..max)).collect()
}

fn random_loss_config(rng: &mut ChaCha8Rng) -> LossConfig {
    LossConfig {
        margin: rng.random_range(0.0..1.5),
        policy: if rng.random_bool(0.5) {
            MiningPolicy::DomainClass
        } else {
            MiningPolicy::Standard
        },
        selection: if rng.random_bool(0.7) {
            Selection::BatchHard
        } else {
            Selection::BatchAll
        },
        use_bn: rng.random_bool(0.7),
        use_fn: rng.random_bool(0.4),
        classifier_input: if rng.random_bool(0.5) {
            ClassifierInput::AfterBn
        } else {
            ClassifierInput::BeforeBn
        },
        dct_weight: if rng.random_bool(0.8) {
            rng.random_range(0.5..2.0)
        } else {
            0.0
        },
    }
}

fn check_distance_hinge(rng: &mut ChaCha8Rng) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let n = rng.random_range(6..17);
    let d = rng.random_range(2..6);
    let (num_classes, num_domains) = (rng.random_range(2..5), rng.random_range(2..4));
    let classes = random_labels(rng, n, num_classes);
    let domains = random_labels(rng, n, num_domains);
    let emb = random_matrix(rng, n, d, 1.0);
    let cfg = random_loss_config(rng);
    if triplet_kink_gap(&emb, &classes, &domains, &cfg)? < KINK_GAP {
        return Ok(None);
    }
    let (_, grad, _) = dct_loss(&emb, &classes, &domains, &cfg)?;
    let numeric = numeric_gradient(emb.data(), |v| {
        dct_loss(&with_data(emb.shape(), v), &classes, &domains, &cfg)
            .expect("dct")
            .0
    });
    Ok(Some((grad.into_data(), numeric)))
}

fn check_cross_entropy(rng: &mut ChaCha8Rng) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let (n, c) = (rng.random_range(1..9), rng.random_range(2..6));
    let logits = random_matrix(rng, n, c, 3.0);
    let labels = random_labels(rng, n, c);
    let (_, grad) = softmax_cross_entropy(&logits, &labels)?;
    let numeric = numeric_gradient(logits.data(), |v| {
        softmax_cross_entropy(&with_data(logits.shape(), v), &labels)
            .expect("ce")
            .0
    });
    Ok(Some((grad.into_data(), numeric)))
}

fn set_blocks(params: &mut ModelParams, flat: &[f64]) {
    let mut off = 0;
    for block in params.blocks_mut() {
        let len = block.len();
        block.copy_from_slice(&flat[off..off + len]);
        off += len;
    }
}

/// Triplet features the loss sees, for the kink test.
fn triplet_features(params: &ModelParams, batch: &Matrix, cfg: &LossConfig) -> Result<Matrix> {
    let (f, _) = params.encoder.forward(batch)?;
    let f = if cfg.use_bn {
        nobias_bn_train(&params.bn.gamma, params.bn.eps, &f)?.0
    } else {
        f
    };
    Ok(if cfg.use_fn { feature_normalize_forward(&f)?.0 } else { f })
}

fn check_total_loss(rng: &mut ChaCha8Rng) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let dims = [rng.random_range(3..6), rng.random_range(4..8), rng.random_range(3..5)];
    let num_classes = rng.random_range(2..4);
    let n = rng.random_range(8..15);
    let mut params = ModelParams::init(&dims, num_classes, rng)?;
    for g in params.bn.gamma.iter_mut() {
        *g = rng.random_range(0.5..1.5);
    }
    let batch = random_matrix(rng, n, dims[0], 1.0);
    let classes = random_labels(rng, n, num_classes);
    let domains = random_labels(rng, n, 2);
    let cfg = random_loss_config(rng);
    if min_relu_preactivation(&params.encoder, &batch)? < KINK_GAP {
        return Ok(None);
    }
    let feats = match triplet_features(&params, &batch, &cfg) {
        Ok(f) => f,
        Err(_) => return Ok(None),
    };
    if cfg.dct_weight > 0.0 && triplet_kink_gap(&feats, &classes, &domains, &cfg)? < KINK_GAP {
        return Ok(None);
    }
    let out = total_loss(&params, &batch, &classes, &domains, &cfg)?;
    let mut analytic = out.grads.flatten();
    let flat: Vec<f64> = params.blocks().concat();
    let mut numeric = numeric_gradient(&flat, |v| {
        let mut p = params.clone();
        set_blocks(&mut p, v);
        total_loss(&p, &batch, &classes, &domains, &cfg)
            .expect("total")
            .loss
            .total
    });
    // γ is inert when batch norm is off; both sides are zero there
    if !cfg.use_bn {
        let g0: usize = params.encoder.layers.iter().map(|l| l.linear.weight.data().len() + l.linear.bias.len()).sum();
        for k in g0..g0 + params.bn.dim() {
            analytic[k] = 0.0;
            numeric[k] = 0.0;
        }
    }
    Ok(Some((analytic, numeric)))
}

/// Names of the checked operations, in report order.
pub const OPS: [&str; 7] = [
    "linear",
    "relu_mlp",
    "nobias_batch_norm",
    "feature_normalize",
    "distance_hinge",
    "softmax_cross_entropy",
    "total_loss",
];

/// Runs `cases` smooth random configurations per operation.
pub fn run_gradcheck(seed: u64, cases: usize) -> Result<GradCheckReport> {
    let mut runner = Runner {
        rng: ChaCha8Rng::seed_from_u64(seed),
        cases,
    };
    let checks = vec![
        runner.run(OPS[0], check_linear)?,
        runner.run(OPS[1], check_relu_mlp)?,
        runner.run(OPS[2], check_batch_norm)?,
        runner.run(OPS[3], check_feature_norm)?,
        runner.run(OPS[4], check_distance_hinge)?,
        runner.run(OPS[5], check_cross_entropy)?,
        runner.run(OPS[6], check_total_loss)?,
    ];
    Ok(GradCheckReport {
        step: STEP,
        tolerance: TOLERANCE,
        seed,
        checks,
    })
}
