use serde::{Deserialize, Serialize};

use super::model::{ModelParams, ParamGrads};
use crate::error::{DctError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(DctError::InvalidConfig(format!("lr {} must be >= 0", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(DctError::InvalidConfig(format!(
                "momentum {} must lie in [0, 1)",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(DctError::InvalidConfig(format!(
                "weight_decay {} must be >= 0",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// SGD with heavy-ball momentum and L2 weight decay:
/// `v ← μ v + (g + λ w)`, `w ← w − η v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    config: SgdConfig,
    velocity: Option<Vec<Vec<f64>>>,
}

impl Sgd {
    pub fn new(config: SgdConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            velocity: None,
        })
    }

    pub fn config(&self) -> SgdConfig {
        self.config
    }

    /// Refuses the whole step if any gradient entry is non-finite.
    pub fn step(&mut self, params: &mut ModelParams, grads: &ParamGrads) -> Result<()> {
        let grad_blocks = grads.blocks();
        let mut param_blocks = params.blocks_mut();
        if grad_blocks.len() != param_blocks.len()
            || grad_blocks.iter().zip(&param_blocks).any(|(g, p)| g.len() != p.len())
        {
            return Err(DctError::ShapeMismatch {
                context: "sgd step".into(),
                expected: (param_blocks.len(), 0),
                got: (grad_blocks.len(), 0),
            });
        }
        if let Some(i) = grad_blocks.iter().position(|b| b.iter().any(|v| !v.is_finite())) {
            return Err(DctError::NonFiniteGradient(i));
        }
        let velocity = self
            .velocity
            .get_or_insert_with(|| grad_blocks.iter().map(|b| vec![0.0; b.len()]).collect());
        let SgdConfig {
            lr,
            momentum,
            weight_decay,
        } = self.config;
        for ((p, g), v) in param_blocks.iter_mut().zip(&grad_blocks).zip(velocity.iter_mut()) {
            for ((w, &gw), vw) in p.iter_mut().zip(g.iter()).zip(v.iter_mut()) {
                let d = gw + weight_decay * *w;
                *vw = momentum * *vw + d;
                *w -= lr * *vw;
            }
        }
        Ok(())
    }
}

/// Single momentum-free step; see [`Sgd`] for the stateful form.
pub fn sgd_step(params: &mut ModelParams, grads: &ParamGrads, lr: f64, weight_decay: f64) -> Result<()> {
    Sgd::new(SgdConfig {
        lr,
        momentum: 0.0,
        weight_decay,
    })?
    .step(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::{Activation, Layer, Linear, Matrix, Mlp};
    use crate::embedding_space::BatchNormState;

    fn scalar_model(w: f64) -> ModelParams {
        ModelParams {
            encoder: Mlp::from_layers(vec![Layer {
                linear: Linear {
                    weight: Matrix::new(1, 1, vec![w]).unwrap(),
                    bias: vec![0.0],
                },
                activation: Activation::Identity,
            }])
            .unwrap(),
            bn: BatchNormState::new(1),
            classifier: Linear {
                weight: Matrix::zeros(2, 1),
                bias: vec![0.0; 2],
            },
        }
    }

    fn weight_grad(params: &ModelParams, g: f64) -> ParamGrads {
        let mut grads = ParamGrads::zeros_like(params);
        grads.encoder[0].weight.data_mut()[0] = g;
        grads
    }

    fn w(params: &ModelParams) -> f64 {
        params.encoder.layers[0].linear.weight.data()[0]
    }

    #[test]
    fn plain_step() {
        let mut p = scalar_model(1.0);
        let g = weight_grad(&p, 2.0);
        sgd_step(&mut p, &g, 0.1, 0.0).unwrap();
        assert!((w(&p) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn momentum_accumulates() {
        let mut p = scalar_model(1.0);
        let g = weight_grad(&p, 2.0);
        let mut opt = Sgd::new(SgdConfig {
            lr: 0.1,
            momentum: 0.9,
            weight_decay: 0.0,
        })
        .unwrap();
        opt.step(&mut p, &g).unwrap();
        assert!((1.0 - w(&p) - 0.2).abs() < 1e-12);
        let before = w(&p);
        opt.step(&mut p, &g).unwrap();
        assert!((before - w(&p) - 0.38).abs() < 1e-12);
    }

    #[test]
    fn zero_grad_leaves_params() {
        let mut p = scalar_model(0.3);
        let orig = p.clone();
        let g = ParamGrads::zeros_like(&p);
        let mut opt = Sgd::new(SgdConfig {
            lr: 0.5,
            momentum: 0.9,
            weight_decay: 0.0,
        })
        .unwrap();
        opt.step(&mut p, &g).unwrap();
        assert_eq!(p, orig);
    }

    #[test]
    fn non_finite_grad_refused() {
        let mut p = scalar_model(1.0);
        let orig = p.clone();
        let g = weight_grad(&p, f64::NAN);
        assert!(matches!(sgd_step(&mut p, &g, 0.1, 0.0), Err(DctError::NonFiniteGradient(0))));
        assert_eq!(p, orig);
    }

    #[test]
    fn invalid_hyperparameters_rejected() {
        for (lr, m, wd) in [(-0.1, 0.0, 0.0), (0.1, 1.0, 0.0), (0.1, 0.5, -1.0)] {
            assert!(Sgd::new(SgdConfig {
                lr,
                momentum: m,
                weight_decay: wd
            })
            .is_err());
        }
    }
}
