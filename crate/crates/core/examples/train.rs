//! Single training run with domain 3 held out.
//!
//! `cargo run --release --example train`

use dct::harness::{train, TrainConfig};

fn main() -> dct::Result<()> {
    let cfg = TrainConfig {
        held_out_domain: Some(3),
        ..TrainConfig::default()
    };
    let report = train(&cfg)?;
    for e in report.epochs.iter().filter(|e| e.eval.is_some()) {
        let eval = e.eval.as_ref().unwrap();
        println!(
            "epoch {:3}  loss {:.4} (ce {:.4}, dct {:.4})  active {:.2}  source acc {:.3}  domain sil {:+.3}",
            e.epoch + 1,
            e.total_loss,
            e.ce_loss,
            e.dct_loss,
            e.active_fraction,
            eval.source_accuracy,
            eval.probe_dispersion.domain_silhouette,
        );
    }
    println!("held-out accuracy: {:.3}", report.held_out_accuracy.unwrap_or(f64::NAN));
    Ok(())
}
