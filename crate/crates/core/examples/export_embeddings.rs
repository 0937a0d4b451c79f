//! Trains a model and writes eval-mode embeddings to `embeddings.csv` for
//! external plotting.

use std::fs::File;
use std::io::BufWriter;

use dct::harness::{export_embeddings, train_model, write_embeddings_csv, TrainConfig};

fn main() -> dct::Result<()> {
    let cfg = TrainConfig {
        held_out_domain: Some(0),
        ..TrainConfig::default()
    };
    let run = train_model(&cfg)?;
    let emb = export_embeddings(&run.model, &cfg.loss, &run.dataset)?;
    write_embeddings_csv(BufWriter::new(File::create("embeddings.csv")?), &emb)?;
    println!("wrote {} rows of dim {} to embeddings.csv", emb.len(), emb.dim());
    Ok(())
}
