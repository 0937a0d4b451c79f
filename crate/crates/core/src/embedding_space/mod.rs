//! Embedding-space normalizations applied before the metric loss.
//!
//! [`BatchNormState`] is batch normalization with a learnable scale and no
//! shift term, so every train-mode batch of outputs has zero mean per
//! dimension. [`feature_normalize_forward`] projects rows onto the unit
//! sphere, which bounds every pairwise distance by 2.

mod batch_norm;
mod feature_norm;

pub use batch_norm::{nobias_bn_backward, nobias_bn_train, BatchNormCache, BatchNormState};
pub use feature_norm::{feature_normalize_backward, feature_normalize_forward, FeatureNormCache};
