//! Phase-portrait data: qualitative behavior at large step sizes.
//!
//! At h = 100/92 the step is far beyond the accuracy regime. RK4 spirals
//! inward (its integral decays, a spurious approach to equilibrium), while
//! the conserving method keeps circulating near the correct level set.
//! Writes (t, x1, x2, x3) CSV files for external plotting and prints orbit
//! extents and integral decay.
//!
//! ```bash
//! cargo run --example phase_portrait
//! ```

use dgode::config::{ExperimentConfig, RawConfig};
use dgode::experiments::{phase_trajectory_export, reference_orbit, write_phase_csv};
use dgode::linalg::norm;

fn main() -> dgode::Result<()> {
    let raw = RawConfig::parse("methods = rk, dg_linear\nphase_h_list = 0.5, 100/92\n")?;
    let cfg = ExperimentConfig::from_raw(&raw)?;
    let out = std::path::Path::new("phase_out");

    let reference = reference_orbit(&cfg, 0.005)?;
    println!(
        "reference orbit: max |x| = {:.4} over t in [0, {}]\n",
        reference.max_state_norm(),
        cfg.t_end
    );
    for (k, run) in phase_trajectory_export(&cfg)?.iter().enumerate() {
        let path = write_phase_csv(out, k % cfg.phase_h_list.len(), run)?;
        let traj = &run.trajectory;
        let i0 = traj.integral_values[0];
        let i_end = *traj.integral_values.last().unwrap();
        println!(
            "{:<10} h = {:.6}: max |x| = {:.4}, I(0) = {:.4} -> I(end) = {:.4}, |x_end| = {:.4}",
            run.method,
            run.h,
            traj.max_state_norm(),
            i0,
            i_end,
            norm(traj.final_state()),
        );
        println!("           -> {}", path.display());
    }
    Ok(())
}
