//! Component and normalization ablations, printed as CSV.

use dct::harness::{ablation_grid, write_ablation_csv, TrainConfig};

fn main() -> dct::Result<()> {
    let rows = ablation_grid(&TrainConfig::default())?;
    write_ablation_csv(std::io::stdout().lock(), &rows)
}
