use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{DctError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

/// Affine map `y = x Wᵀ + b`, with `W` stored as `(out, in)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Linear {
    /// Uniform init in `±sqrt(1/fan_in)` for weights and bias.
    pub fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = (1.0 / in_dim as f64).sqrt();
        let weight = Matrix::from_fn(out_dim, in_dim, |_, _| rng.random_range(-bound..=bound));
        let bias = (0..out_dim)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Self { weight, bias }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        let mut out = input.matmul_t(&self.weight)?;
        for r in 0..out.rows() {
            for (o, b) in out.row_mut(r).iter_mut().zip(&self.bias) {
                *o += b;
            }
        }
        Ok(out)
    }

    /// Returns `(grad_input, grads)` for upstream gradient `grad_out`.
    pub fn backward(&self, input: &Matrix, grad_out: &Matrix) -> Result<(Matrix, LinearGrads)> {
        grad_out.ensure_shape((input.rows(), self.out_dim()), "Linear::backward")?;
        let weight = grad_out.t_matmul(input)?;
        let bias = grad_out.column_sums();
        let grad_in = grad_out.matmul(&self.weight)?;
        Ok((grad_in, LinearGrads { weight, bias }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearGrads {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl LinearGrads {
    pub fn zeros_like(layer: &Linear) -> Self {
        Self {
            weight: Matrix::zeros(layer.out_dim(), layer.in_dim()),
            bias: vec![0.0; layer.out_dim()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub linear: Linear,
    pub activation: Activation,
}

/// Feed-forward encoder: a stack of affine layers with per-layer activations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// One recorded forward step with what its backward needs.
#[derive(Debug, Clone)]
enum TapeRecord {
    Linear { layer: usize, input: Matrix },
    Relu { output: Matrix },
}

/// Forward record consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct GradTape {
    records: Vec<TapeRecord>,
    output_shape: (usize, usize),
}

impl GradTape {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl Mlp {
    /// `dims = [in, h1, ..., out]`; hidden layers use ReLU, the last layer is linear.
    pub fn init<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(DctError::InvalidConfig(format!(
                "encoder dims {dims:?} need at least two positive entries"
            )));
        }
        let n = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Layer {
                linear: Linear::init(w[0], w[1], rng),
                activation: if i + 1 < n {
                    Activation::Relu
                } else {
                    Activation::Identity
                },
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].linear.out_dim() != pair[1].linear.in_dim() {
                return Err(DctError::LayerDimension {
                    layer: i + 1,
                    expected: pair[0].linear.out_dim(),
                    got: pair[1].linear.in_dim(),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.linear.in_dim())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.linear.out_dim())
    }

    pub fn forward(&self, batch: &Matrix) -> Result<(Matrix, GradTape)> {
        let mut records = Vec::with_capacity(self.layers.len() * 2);
        let mut x = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            if x.cols() != layer.linear.in_dim() {
                return Err(DctError::LayerDimension {
                    layer: i,
                    expected: layer.linear.in_dim(),
                    got: x.cols(),
                });
            }
            let y = layer.linear.forward(&x)?;
            records.push(TapeRecord::Linear { layer: i, input: x });
            x = match layer.activation {
                Activation::Identity => y,
                Activation::Relu => {
                    let out = y.map(|v| v.max(0.0));
                    records.push(TapeRecord::Relu {
                        output: out.clone(),
                    });
                    out
                }
            };
        }
        let output_shape = x.shape();
        Ok((
            x,
            GradTape {
                records,
                output_shape,
            },
        ))
    }

    /// Walks the tape in reverse; returns per-layer grads and the gradient w.r.t. the input batch.
    pub fn backward(&self, tape: &GradTape, upstream: &Matrix) -> Result<(Vec<LinearGrads>, Matrix)> {
        upstream.ensure_shape(tape.output_shape, "Mlp::backward")?;
        let mut grads: Vec<Option<LinearGrads>> = vec![None; self.layers.len()];
        let mut g = upstream.clone();
        for record in tape.records.iter().rev() {
            match record {
                TapeRecord::Relu { output } => {
                    for (gv, &o) in g.data_mut().iter_mut().zip(output.data()) {
                        if o <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                }
                TapeRecord::Linear { layer, input } => {
                    let (gin, lg) = self.layers[*layer].linear.backward(input, &g)?;
                    grads[*layer] = Some(lg);
                    g = gin;
                }
            }
        }
        let grads = grads
            .into_iter()
            .zip(&self.layers)
            .map(|(g, l)| g.unwrap_or_else(|| LinearGrads::zeros_like(&l.linear)))
            .collect();
        Ok((grads, g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_net(n: usize, activation: Activation) -> Mlp {
        Mlp::from_layers(vec![Layer {
            linear: Linear {
                weight: Matrix::identity(n),
                bias: vec![0.0; n],
            },
            activation,
        }])
        .unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let x = Matrix::from_rows(&[[1.0, -2.0, 3.0], [0.5, 0.0, -7.0]]).unwrap();
        let (y, _) = identity_net(3, Activation::Identity).forward(&x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn relu_kills_negative_input() {
        let x = Matrix::from_rows(&[[-1.0, -2.0], [-0.1, -9.0]]).unwrap();
        let (y, _) = identity_net(2, Activation::Relu).forward(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sum_loss_weight_grad_is_column_sum_of_inputs() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, -4.0], [0.5, 0.5]]).unwrap();
        let net = identity_net(2, Activation::Identity);
        let (y, tape) = net.forward(&x).unwrap();
        let ones = y.map(|_| 1.0);
        let (grads, _) = net.backward(&tape, &ones).unwrap();
        let sums = x.column_sums();
        for o in 0..2 {
            for i in 0..2 {
                assert_eq!(grads[0].weight[(o, i)], sums[i]);
            }
        }
        assert_eq!(grads[0].bias, vec![3.0, 3.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::init(&[4, 6, 3], &mut rng).unwrap();
        let x = Matrix::from_fn(5, 4, |r, c| (r as f64 - c as f64) * 0.3);
        let (y, tape) = net.forward(&x).unwrap();
        let (grads, gin) = net.backward(&tape, &Matrix::zeros(y.rows(), y.cols())).unwrap();
        assert!(grads
            .iter()
            .all(|g| g.weight.data().iter().all(|&v| v == 0.0) && g.bias.iter().all(|&v| v == 0.0)));
        assert!(gin.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch_names_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::init(&[4, 6, 3], &mut rng).unwrap();
        let err = net.forward(&Matrix::zeros(2, 5)).unwrap_err();
        assert!(matches!(err, DctError::LayerDimension { layer: 0, .. }));
        let bad = vec![net.layers[0].clone(), net.layers[0].clone()];
        assert!(matches!(
            Mlp::from_layers(bad),
            Err(DctError::LayerDimension { layer: 1, .. })
        ));
    }

    #[test]
    fn tape_has_one_record_per_op() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::init(&[4, 6, 5, 3], &mut rng).unwrap();
        let (_, tape) = net.forward(&Matrix::zeros(2, 4)).unwrap();
        // 3 linear + 2 relu
        assert_eq!(tape.len(), 5);
    }
}
