//! How strongly domain signal dominates class signal, in the raw data and
//! after an untrained encoder.

use dct::harness::{motivate, TrainConfig};

fn main() -> dct::Result<()> {
    let report = motivate(&TrainConfig::default())?;
    let d = &report.dominance;
    println!("d_domain {:.4}  d_class {:.4}  ratio {:.2}", d.d_domain, d.d_class, d.ratio);
    println!("input     {:?}", report.input_dispersion);
    println!("untrained {:?}", report.untrained_dispersion);
    for p in &report.domain_scale_sweep {
        let u = &p.untrained_dispersion;
        println!(
            "domain scale {:3.0}: ratio {:7.3}  domain purity {:.3}  class purity {:.3}",
            p.domain_scale, p.dominance.ratio, u.domain_knn_purity, u.class_knn_purity
        );
    }
    Ok(())
}
