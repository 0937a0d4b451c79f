//! Central finite-difference checks of every differentiable op.

use dct::gradcheck::run_gradcheck;

fn main() -> dct::Result<()> {
    let report = run_gradcheck(7, 100)?;
    for c in &report.checks {
        println!(
            "{:22} cases {:3}  skipped {:2}  max rel err {:.2e}  {}",
            c.op,
            c.cases,
            c.skipped_near_kink,
            c.max_rel_error,
            if c.passed { "ok" } else { "FAIL" }
        );
    }
    Ok(())
}
