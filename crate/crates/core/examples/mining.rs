//! Standard versus domain-class batch-hard mining on a small batch.

use dct::diffcore::{pairwise_sq_distances, Matrix};
use dct::mining::{batch_all_expand, batch_hard_select, candidate_masks, MiningPolicy};

fn main() -> dct::Result<()> {
    let classes = [0, 0, 1, 1, 0, 0, 1, 1];
    let domains = [0, 0, 0, 0, 1, 1, 1, 1];
    let emb = Matrix::from_rows(&[
        vec![0.0, 0.0],
        vec![0.2, 0.1],
        vec![1.0, 0.0],
        vec![1.1, 0.2],
        vec![0.0, 5.0],
        vec![0.1, 5.2],
        vec![1.0, 5.0],
        vec![1.2, 5.1],
    ])?;
    let dist = pairwise_sq_distances(&emb).map(f64::sqrt);

    for policy in [MiningPolicy::Standard, MiningPolicy::DomainClass] {
        let masks = candidate_masks(&classes, &domains, policy)?;
        let hard = batch_hard_select(&dist, &masks)?;
        println!("{policy:?}: {} triplets in batch-all", batch_all_expand(&masks).triplets.len());
        for t in &hard.triplets {
            println!(
                "  anchor {} (c{} d{})  positive {} (d{})  negative {} (d{})",
                t.anchor, classes[t.anchor], domains[t.anchor], t.positive, domains[t.positive], t.negative, domains[t.negative]
            );
        }
    }
    Ok(())
}
