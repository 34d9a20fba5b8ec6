//! How large can the step be near a critical point of the integral?
//!
//! Takes single steps from starts R·(cos 1.1, 0, sin 1.1) for shrinking R
//! and scans step sizes on a log grid, watching the skew denominator (as a
//! fraction of |i(x)|²) and the condition number of the step matrix. The
//! admissible step range does not shrink as the start approaches the
//! critical point at the origin — it grows.
//!
//! ```bash
//! cargo run --example step_size_criterion
//! ```

use dgode::config::{ExperimentConfig, RawConfig};
use dgode::experiments::{largest_admissible_h, stepsize_criterion_study, StepCritStatus};

fn main() -> dgode::Result<()> {
    let cfg = ExperimentConfig::from_raw(&RawConfig::default())?;
    let rows = stepsize_criterion_study(&cfg)?;

    for &r in &cfg.r_scales {
        println!("start scale R = {r}:");
        match largest_admissible_h(&rows, r, cfg.denom_floor) {
            Some(h) => println!(
                "  largest grid h with denominator > {} |i|^2: {h:.4}",
                cfg.denom_floor
            ),
            None => println!("  start is a critical point; every step returns x"),
        }
        // show the grid rows bracketing the admissibility edge
        let sample: Vec<&dgode::experiments::StepCritRow> =
            rows.iter().filter(|row| row.r_scale == r).collect();
        for pair in sample.windows(2) {
            if pair[0].status == StepCritStatus::Ok && pair[1].status != StepCritStatus::Ok {
                for row in pair {
                    println!(
                        "  h = {:>9.4}: denom/|i|^2 = {:>9.5}, cond = {:>12.4}, status = {}",
                        row.h,
                        row.denom_ratio.unwrap_or(f64::NAN),
                        row.cond.unwrap_or(f64::NAN),
                        row.status.as_str()
                    );
                }
            }
        }
        println!();
    }
    Ok(())
}
