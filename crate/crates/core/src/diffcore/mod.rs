//! Dense forward/backward engine for a small MLP encoder and linear head.

mod matrix;
mod mlp;
mod model;
mod ops;
mod optim;

pub use matrix::{dot, Matrix};
pub use mlp::{Activation, GradTape, Layer, Linear, LinearGrads, Mlp};
pub use model::{ModelParams, ParamGrads};
pub use ops::{pairwise_sq_distances, softmax_cross_entropy};
pub use optim::{sgd_step, Sgd, SgdConfig};
