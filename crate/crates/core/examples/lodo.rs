//! Leave-one-domain-out evaluation averaged over trial seeds.

use dct::harness::{leave_one_domain_out, TrainConfig};

fn main() -> dct::Result<()> {
    let summary = leave_one_domain_out(&TrainConfig::default())?;
    for d in &summary.per_domain {
        println!("domain {}: {:.3} {:?}", d.domain, d.mean_accuracy, d.accuracies);
    }
    println!("mean held-out accuracy {:.4} over seeds {:?}", summary.mean_accuracy, summary.seeds);
    println!("{}", summary.mean_dispersion.to_json()?);
    Ok(())
}
