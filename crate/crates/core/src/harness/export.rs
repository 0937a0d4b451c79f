use std::io::{Read, Write};

use crate::dataset::{read_labeled_csv, write_labeled_csv, Dataset};
use crate::diffcore::ModelParams;
use crate::error::Result;
use crate::losses::{forward_eval, LossConfig};

/// Eval-mode triplet-space embeddings of `dataset`, one row per sample.
pub fn export_embeddings(model: &ModelParams, loss: &LossConfig, dataset: &Dataset) -> Result<Dataset> {
    let out = forward_eval(model, &dataset.features, loss)?;
    Dataset::new(out.embeddings, dataset.class_labels.clone(), dataset.domain_labels.clone())
}

/// CSV with header `class_id,domain_id,e0,...`.
pub fn write_embeddings_csv<W: Write>(writer: W, embeddings: &Dataset) -> Result<()> {
    write_labeled_csv(
        writer,
        "e",
        &embeddings.class_labels,
        &embeddings.domain_labels,
        &embeddings.features,
    )
}

pub fn import_embeddings<R: Read>(reader: R) -> Result<Dataset> {
    read_labeled_csv(reader, "e")
}

