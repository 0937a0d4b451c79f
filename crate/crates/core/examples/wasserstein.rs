//! Empirical 1-D Wasserstein distances and the per-label conditional distances
//! of a synthetic mixture.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use dct::domain_model::{conditional_distance, sample_dataset, wasserstein_1d, LabelKind, MixtureConfig};

fn main() -> dct::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a: Vec<f64> = Normal::new(0.0, 1.0).unwrap().sample_iter(&mut rng).take(10_000).collect();
    let b: Vec<f64> = Normal::new(2.0, 1.0).unwrap().sample_iter(&mut rng).take(7_000).collect();
    for p in [1.0, 2.0, 3.0] {
        println!("W_{p} between N(0,1) and N(2,1) samples: {:.4}", wasserstein_1d(&a, &b, p)?);
    }

    for scale in [0.0, 1.0, 4.0] {
        let cfg = MixtureConfig {
            domain_scale: scale,
            ..MixtureConfig::default()
        };
        let ds = sample_dataset(&cfg.build(0)?, 100, 2)?;
        println!(
            "domain scale {scale}: d_domain {:.4}  d_class {:.4}",
            conditional_distance(&ds, LabelKind::Domain, 2.0)?,
            conditional_distance(&ds, LabelKind::Class, 2.0)?,
        );
    }
    Ok(())
}
