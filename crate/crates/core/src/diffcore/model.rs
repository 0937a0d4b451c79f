use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Linear, LinearGrads, Mlp};
use crate::embedding_space::BatchNormState;
use crate::error::{DctError, Result};

/// Encoder, scale-only batch norm and linear classifier head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub encoder: Mlp,
    pub bn: BatchNormState,
    pub classifier: Linear,
}

impl ModelParams {
    /// `encoder_dims = [in, hidden.., embedding]`.
    pub fn init<R: Rng + ?Sized>(encoder_dims: &[usize], num_classes: usize, rng: &mut R) -> Result<Self> {
        if num_classes < 2 {
            return Err(DctError::InvalidConfig("need at least 2 classes".into()));
        }
        let encoder = Mlp::init(encoder_dims, rng)?;
        let dim = encoder.output_dim();
        let classifier = Linear::init(dim, num_classes, rng);
        Ok(Self {
            encoder,
            bn: BatchNormState::new(dim),
            classifier,
        })
    }

    pub fn embedding_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.classifier.out_dim()
    }

    /// Trainable blocks in a fixed order: encoder (weight, bias)*, γ, classifier weight, bias.
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.encoder.layers {
            out.push(l.linear.weight.data());
            out.push(&l.linear.bias);
        }
        out.push(&self.bn.gamma);
        out.push(self.classifier.weight.data());
        out.push(&self.classifier.bias);
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.encoder.layers {
            out.push(l.linear.weight.data_mut());
            out.push(&mut l.linear.bias);
        }
        out.push(&mut self.bn.gamma);
        out.push(self.classifier.weight.data_mut());
        out.push(&mut self.classifier.bias);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Gradient for every trainable entry of [`ModelParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrads {
    pub encoder: Vec<LinearGrads>,
    pub gamma: Vec<f64>,
    pub classifier: LinearGrads,
}

impl ParamGrads {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            encoder: params
                .encoder
                .layers
                .iter()
                .map(|l| LinearGrads::zeros_like(&l.linear))
                .collect(),
            gamma: vec![0.0; params.bn.dim()],
            classifier: LinearGrads::zeros_like(&params.classifier),
        }
    }

    /// Same block order as [`ModelParams::blocks`].
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for g in &self.encoder {
            out.push(g.weight.data());
            out.push(&g.bias);
        }
        out.push(&self.gamma);
        out.push(self.classifier.weight.data());
        out.push(&self.classifier.bias);
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.blocks().concat()
    }

    pub fn is_zero(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|&v| v == 0.0))
    }
}
