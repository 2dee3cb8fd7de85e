//! Verifies every analytic gradient against central finite differences and
//! prints one line per parameter group.
//!
//! ```bash
//! cargo run --example gradient_check
//! ```

use ntee::gradcheck::{run_all, GRAD_TOLERANCE};

fn main() -> ntee::Result<()> {
    println!("{:<28} {:>14}  status", "group", "max rel err");
    let mut worst: Option<&str> = None;
    let mut worst_err = 0.0;
    let reports = run_all()?;
    for report in &reports {
        println!(
            "{:<28} {:>14.3e}  {}",
            report.group,
            report.max_rel_err,
            if report.passed() { "ok" } else { "FAIL" }
        );
        if report.max_rel_err > worst_err {
            worst_err = report.max_rel_err;
            worst = Some(&report.group);
        }
    }
    println!(
        "\nworst group: {} at {worst_err:.3e} (tolerance {GRAD_TOLERANCE:.0e})",
        worst.unwrap_or("-")
    );
    Ok(())
}
