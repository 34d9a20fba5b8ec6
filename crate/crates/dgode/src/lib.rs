//! dgode: discrete gradient methods that conserve a first integral exactly.
//!
//! For an autonomous ODE ẋ = f(x) with a conserved quantity I (so that
//! ∇I·f = 0), the steppers in this crate advance the state while keeping
//! I(x_n) equal to I(x_0) up to round-off, at the order of accuracy of an
//! underlying Runge-Kutta method. The pieces:
//!
//! - [`problems`]: ODE problems carrying a first integral, including the
//!   modified rigid body benchmark and a harmonic oscillator;
//! - [`discrete_gradient`]: midpoint, mean-value and coordinate-increment
//!   discrete gradients satisfying ī(x,x')·(x'-x) = I(x') - I(x);
//! - [`skew`]: the default skew matrix S = (f iᵀ - i fᵀ)/|i|² and its
//!   two-point discretization with pluggable gradient approximations;
//! - [`rk`]: Butcher tableaus, stage solves and f̃ assembly;
//! - [`integrators`]: the fixed-point and linearly implicit discrete
//!   gradient steppers, the projection method, the plain RK baseline, and
//!   trajectory integration with exact cost counters;
//! - [`linalg`]: the small dense solve and condition-number diagnostics;
//! - [`experiments`] and [`config`]: reproducible benchmark studies
//!   (conservation, order, efficiency, step-size criterion, phase portraits)
//!   driven by plain-text config files, emitting CSV.
//!
//! Quick start:
//!
//! ```
//! use dgode::{integrate, rigid_body_modified, DgLinearlyImplicit, DgMethodConfig};
//! use dgode::{rk4_classic, DiscreteGradientKind};
//!
//! let problem = rigid_body_modified(2.0, 1.0, 2.0 / 3.0, 1.0).unwrap();
//! let x0 = [1.1_f64.cos(), 0.0, 1.1_f64.sin()];
//! let stepper = DgLinearlyImplicit {
//!     cfg: DgMethodConfig::new(rk4_classic(), DiscreteGradientKind::MidpointQuadratic),
//! };
//! let traj = integrate(&stepper, &problem, &x0, 0.5, 100.0).unwrap();
//! assert!(traj.max_integral_drift() < 1e-12);
//! ```
//!
//! The runnable examples cover each capability; see `examples/` and the
//! README for the experiment CLI.

pub mod config;
pub mod discrete_gradient;
pub mod error;
pub mod experiments;
pub mod integrators;
pub mod linalg;
pub mod problems;
pub mod rk;
pub mod skew;

pub use crate::config::{ExperimentConfig, MethodName, RawConfig};
pub use crate::discrete_gradient::{
    consistency_residual, discrete_gradient, verify_dg_identity, DiscreteGradientKind,
};
pub use crate::error::{Error, Result};
pub use crate::experiments::{
    conservation_study, efficiency_study, fit_log_log, order_study, phase_trajectory_export,
    reference_solution, simulate_run, stepsize_criterion_study, OrderFit, ReferenceSettings,
};
pub use crate::integrators::{
    dg_step_fixed_point, dg_step_linearly_implicit, integrate, projection_step,
    theoretical_step_bound, BoundEstimates, CostCounters, DgFixedPoint, DgLinearlyImplicit,
    DgMethodConfig, ProjectionMethod, RungeKuttaStepper, StepOutcome, Stepper, Trajectory,
};
pub use crate::linalg::{condition_number, lu_solve, DenseMatrix};
pub use crate::problems::{
    harmonic_oscillator, rigid_body_modified, CriticalPointPolicy, FirstIntegral, OdeProblem,
    QuadraticForm,
};
pub use crate::rk::{
    euler_explicit, f_tilde, implicit_midpoint, rk4_classic, rk_stages, rk_step, ButcherTableau,
    StageMatrix,
};
pub use crate::skew::{default_skew, discrete_skew, GradientApproxChoice, SkewConfig};
