//! Sampling, training and experiment protocols on the synthetic mixture.

mod config;
mod export;
mod motivate;
mod protocol;
mod sampler;
mod train;

pub use config::{derive_seed, BatchSpec, TrainConfig};
pub use export::{export_embeddings, import_embeddings, write_embeddings_csv};
pub use motivate::{motivate, MotivateReport, ScaleSweepPoint};
pub use protocol::{
    ablation_grid, ablation_rows, leave_one_domain_out, margin_sweep, write_ablation_csv, write_sweep_csv,
    AblationRow, DomainResult, LodoSummary, SweepRow,
};
pub use sampler::PkSampler;
pub use train::{train, train_model, EpochRecord, EvalRecord, RunReport, TrainedRun};
