//! Conserving integration of a user-defined problem with a non-quadratic
//! integral.
//!
//! A planar system f = J∇I with I(x) = x1⁴/4 + x2²/2 (a Duffing-style
//! energy). There is no quadratic form here, so the linearly implicit
//! stepper refuses the problem; the general fixed-point stepper with the
//! mean-value discrete gradient still conserves I to round-off, while RK4
//! drifts.
//!
//! ```bash
//! cargo run --example custom_problem
//! ```

use dgode::integrators::{DgFixedPoint, DgMethodConfig, RungeKuttaStepper};
use dgode::problems::{FirstIntegral, OdeProblem};
use dgode::{dg_step_linearly_implicit, integrate, rk4_classic, DiscreteGradientKind, Error};

fn main() -> dgode::Result<()> {
    let problem = OdeProblem::new(
        "duffing_energy",
        2,
        // f = (∂I/∂x2, -∂I/∂x1): I is conserved along f by construction
        |x: &[f64]| vec![x[1], -x[0].powi(3)],
        FirstIntegral::new(
            |x: &[f64]| 0.25 * x[0].powi(4) + 0.5 * x[1] * x[1],
            |x: &[f64]| vec![x[0].powi(3), x[1]],
        ),
    )?;
    let x0 = [1.2, 0.0];
    let (h, t_end) = (0.05, 200.0);

    let quadratic_cfg = DgMethodConfig::new(rk4_classic(), DiscreteGradientKind::MidpointQuadratic);
    match dg_step_linearly_implicit(&quadratic_cfg, &problem, &x0, h) {
        Err(Error::UnsupportedIntegral) => {
            println!("linearly implicit stepper: refused (no quadratic form), as expected\n")
        }
        other => println!("unexpected outcome from the linearly implicit stepper: {other:?}\n"),
    }

    let cfg = DgMethodConfig::new(rk4_classic(), DiscreteGradientKind::MeanValue { nodes: 3 });
    let dg = DgFixedPoint { cfg };
    let traj = integrate(&dg, &problem, &x0, h, t_end)?;
    println!(
        "dg_fixed_point (mean-value gradient, 3 nodes): {} steps, max drift {:.3e}, avg iterations {:.2}",
        traj.cost.steps,
        traj.max_integral_drift(),
        traj.cost.iterations as f64 / traj.cost.steps as f64
    );

    let rk = RungeKuttaStepper {
        tableau: rk4_classic(),
    };
    let baseline = integrate(&rk, &problem, &x0, h, t_end)?;
    println!(
        "plain rk4:                                     {} steps, max drift {:.3e}",
        baseline.cost.steps,
        baseline.max_integral_drift()
    );
    Ok(())
}
