//! Synthetic class/domain mixture and Wasserstein diagnostics.
//!
//! Samples are `s_B · class_mean[c] + s_A · domain_offset[d] + noise`, so the
//! class signal (determinant) and the domain signal (non-determinant) are
//! controlled independently. Distances between conditional distributions are
//! measured with per-dimension 1-D Wasserstein distances averaged over
//! dimensions and label pairs, a computable proxy for comparing the two signals.

mod mixture;
mod wasserstein;

pub use mixture::{sample_dataset, MixtureConfig, MixtureSpec};
pub use wasserstein::{conditional_distance, dominance_report, wasserstein_1d, DominanceReport, LabelKind};
