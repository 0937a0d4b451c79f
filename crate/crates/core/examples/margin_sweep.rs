//! Margin sweep with and without feature normalization.

use dct::harness::{margin_sweep, TrainConfig};

fn main() -> dct::Result<()> {
    let plain = TrainConfig::default();
    let mut normalized = plain.clone();
    normalized.loss.use_fn = true;

    for (label, cfg, margins) in [
        ("bn", &plain, &[0.0, 1.0, 5.0, 15.0][..]),
        ("bn+fn", &normalized, &[0.0, 0.3, 1.0, 2.0][..]),
    ] {
        for row in margin_sweep(cfg, margins)? {
            let d = &row.summary.mean_dispersion;
            println!(
                "{label:6} margin {:5.1}  held-out {:.4}  class sil {:+.4}  domain sil {:+.4}",
                row.margin, row.summary.mean_accuracy, d.class_silhouette, d.domain_silhouette
            );
        }
    }
    Ok(())
}
