//! Production step maps and trajectory integration.
//!
//! Three conserving steppers are provided, together with the plain
//! Runge-Kutta baseline:
//!
//! - [`DgFixedPoint`]: the general discrete gradient method, solving
//!   z = x + h S̃(x,z,h) ī(x,z) by fixed-point iteration;
//! - [`DgLinearlyImplicit`]: the same method for quadratic integrals with the
//!   midpoint discrete gradient and an explicit tableau, where the update is
//!   linear in x' and costs one LU solve per step, no nonlinear iteration;
//! - [`ProjectionMethod`]: a base step followed by projection back onto the
//!   level set of I along i, with a simplified Newton iteration for the
//!   multiplier.
//!
//! Step rejection (the skew denominator falling below its floor) is surfaced
//! as an error, never auto-retried: callers decide whether to halve h, so
//! experiment step grids stay deterministic.

use crate::discrete_gradient::{discrete_gradient, DiscreteGradientKind};
use crate::error::{Error, Result};
use crate::linalg::{add_scaled, condition_number, dot, lu_solve, norm, sub, DenseMatrix};
use crate::problems::{CriticalPointPolicy, OdeProblem};
use crate::rk::{f_tilde, ButcherTableau};
use crate::skew::{discrete_skew, skew_outer, SkewConfig};

/// Everything that pins down one discrete gradient method instance.
#[derive(Clone, Debug)]
pub struct DgMethodConfig {
    pub tableau: ButcherTableau,
    pub dg_kind: DiscreteGradientKind,
    pub skew: SkewConfig,
    /// Relative tolerance on the fixed-point update, scaled by (1 + |x|).
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub critical: CriticalPointPolicy,
    /// Start the iteration from x + h f̃(x,h) instead of x. Off by default;
    /// the plain start is the one covered by the contraction argument.
    pub warm_start: bool,
}

impl DgMethodConfig {
    /// Method with the given f̃ tableau and discrete gradient; the skew
    /// choices default to the linearly implicit recipe (ĩ = î = i(x),
    /// ĭ = ī(x,y)) with the same discrete gradient kind.
    pub fn new(tableau: ButcherTableau, dg_kind: DiscreteGradientKind) -> Self {
        let skew = SkewConfig {
            dg_kind: dg_kind.clone(),
            ..SkewConfig::linearly_implicit()
        };
        DgMethodConfig {
            tableau,
            dg_kind,
            skew,
            fp_tol: 1e-13,
            fp_max_iter: 200,
            critical: CriticalPointPolicy::default(),
            warm_start: false,
        }
    }
}

/// Result of one accepted step, with per-step diagnostics and cost deltas.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub x_new: Vec<f64>,
    /// Nonlinear iterations spent (fixed-point sweeps or Newton updates).
    pub iterations: u32,
    /// Raw skew denominator î·ĭ, when the method has one.
    pub denom: Option<f64>,
    /// Condition number of the linearly implicit system matrix, when formed.
    pub cond: Option<f64>,
    pub f_evals: u64,
    pub i_evals: u64,
    pub linear_solves: u64,
    /// |x' - x| / |i(x)|, for checking the uniqueness-ball condition post
    /// hoc against 1/R' from [`theoretical_step_bound`].
    pub ball_ratio: Option<f64>,
}

impl StepOutcome {
    fn critical_branch(x: &[f64], costs: (u64, u64)) -> StepOutcome {
        StepOutcome {
            x_new: x.to_vec(),
            iterations: 0,
            denom: None,
            cond: None,
            f_evals: costs.0,
            i_evals: costs.1,
            linear_solves: 0,
            ball_ratio: None,
        }
    }
}

fn cost_since(problem: &OdeProblem, before: crate::problems::EvalCounts) -> (u64, u64) {
    let after = problem.eval_counts();
    (after.field - before.field, after.integral - before.integral)
}

/// One step of the discrete gradient method, solved by fixed-point iteration
/// of T(z) = x + h S̃(x,z,h) ī(x,z).
///
/// On the critical branch (|i(x)| at or below the policy threshold) the state
/// is returned unchanged with zero iterations. Otherwise iteration runs from
/// z₀ = x (or the warm start) until the update drops to fp_tol · (1 + |x|);
/// the returned x' is the last application of T, so substituting it back into
/// the step equation leaves a residual of the same order.
pub fn dg_step_fixed_point(
    cfg: &DgMethodConfig,
    problem: &OdeProblem,
    x: &[f64],
    h: f64,
) -> Result<StepOutcome> {
    if h < 0.0 {
        return Err(Error::InvalidParameter("h must be nonnegative".into()));
    }
    if cfg.fp_tol.is_nan() || cfg.fp_tol <= 0.0 || cfg.fp_max_iter == 0 {
        return Err(Error::InvalidParameter(
            "fp_tol must be positive and fp_max_iter at least 1".into(),
        ));
    }
    let before = problem.eval_counts();
    let i_x = problem.integral().gradient(x);
    let i_x_norm = norm(&i_x);
    if cfg.critical.is_critical(x, i_x_norm) {
        return Ok(StepOutcome::critical_branch(x, cost_since(problem, before)));
    }
    let ft = f_tilde(&cfg.tableau, problem, x, h)?;
    let mut z = if cfg.warm_start {
        add_scaled(x, h, &ft)
    } else {
        x.to_vec()
    };
    let tol = cfg.fp_tol * (1.0 + norm(x));
    let mut last_delta = f64::INFINITY;
    for iteration in 1..=cfg.fp_max_iter {
        let (s_mat, denom) = discrete_skew(&cfg.skew, problem, &ft, x, &z, h)?;
        let ibar = discrete_gradient(&cfg.dg_kind, problem.integral(), x, &z)?;
        let z_new = add_scaled(x, h, &s_mat.matvec(&ibar));
        last_delta = norm(&sub(&z_new, &z));
        z = z_new;
        if last_delta <= tol {
            let costs = cost_since(problem, before);
            return Ok(StepOutcome {
                ball_ratio: Some(norm(&sub(&z, x)) / i_x_norm),
                x_new: z,
                iterations: iteration as u32,
                denom: Some(denom),
                cond: None,
                f_evals: costs.0,
                i_evals: costs.1,
                linear_solves: 0,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: cfg.fp_max_iter,
        residual: last_delta,
    })
}

/// One step of the linearly implicit discrete gradient method for quadratic
/// integrals: with S̃(x,h) = (f̃ i(x)ᵀ - i(x) f̃ᵀ) / (i(x) · i(x + (h/2) f̃)),
/// solve
///
/// ```text
/// (Id - (h/2) S̃ M) x' = (Id + (h/2) S̃ M) x + h S̃ b
/// ```
///
/// Exactly one linear solve, no nonlinear iteration. Requires an explicit
/// tableau, the midpoint discrete gradient, and a quadratic integral.
pub fn dg_step_linearly_implicit(
    cfg: &DgMethodConfig,
    problem: &OdeProblem,
    x: &[f64],
    h: f64,
) -> Result<StepOutcome> {
    if h < 0.0 {
        return Err(Error::InvalidParameter("h must be nonnegative".into()));
    }
    if !cfg.tableau.is_explicit() {
        return Err(Error::InvalidParameter(
            "linearly implicit step needs an explicit tableau".into(),
        ));
    }
    if cfg.dg_kind != DiscreteGradientKind::MidpointQuadratic {
        return Err(Error::InvalidParameter(
            "linearly implicit step needs the midpoint discrete gradient".into(),
        ));
    }
    let form = problem
        .integral()
        .quadratic_form()
        .ok_or(Error::UnsupportedIntegral)?
        .clone();
    let before = problem.eval_counts();
    let i_x = problem.integral().gradient(x);
    let i_x_norm = norm(&i_x);
    if cfg.critical.is_critical(x, i_x_norm) {
        return Ok(StepOutcome::critical_branch(x, cost_since(problem, before)));
    }
    let ft = f_tilde(&cfg.tableau, problem, x, h)?;
    // denominator i(x) · i(x + (h/2) f̃): one extra gradient evaluation
    let mid = add_scaled(x, 0.5 * h, &ft);
    let i_mid = problem.integral().gradient(&mid);
    let denom = dot(&i_x, &i_mid);
    let floor = cfg.skew.denom_floor * dot(&i_x, &i_x);
    if denom <= floor {
        return Err(Error::StepRejected { denom, floor });
    }
    let s_mat = skew_outer(&ft, &i_x, denom);
    let sm = s_mat.matmul(&form.matrix);
    let identity = DenseMatrix::identity(x.len());
    let lhs = identity.add(&sm.scaled(-0.5 * h));
    let mut rhs = identity.add(&sm.scaled(0.5 * h)).matvec(x);
    if form.linear.iter().any(|&v| v != 0.0) {
        let sb = s_mat.matvec(&form.linear);
        rhs = add_scaled(&rhs, h, &sb);
    }
    let x_new = lu_solve(&lhs, &rhs)?;
    let cond = condition_number(&lhs);
    let costs = cost_since(problem, before);
    Ok(StepOutcome {
        ball_ratio: Some(norm(&sub(&x_new, x)) / i_x_norm),
        x_new,
        iterations: 0,
        denom: Some(denom),
        cond: Some(cond),
        f_evals: costs.0,
        i_evals: costs.1,
        linear_solves: 1,
    })
}

/// One step of the standard projection method: y = x + h f̃(x,h), then
/// project back onto {I = I(x)} along i(y) with the simplified Newton
/// iteration
///
/// ```text
/// λ₀ = 0,   λ_{k+1} = λ_k - (I(y + λ_k i(y)) - I(x)) / (i(y)·i(y)).
/// ```
///
/// Iteration stops once the integral residual meets newton_tol·(1 + |I(x)|)
/// on two consecutive checks (one confirming update past the first hit, so
/// the accepted residual sits at the iteration's floor rather than at the
/// tolerance boundary), or immediately when it is exactly zero.
pub fn projection_step(
    tab: &ButcherTableau,
    problem: &OdeProblem,
    x: &[f64],
    h: f64,
    newton_tol: f64,
    newton_max: usize,
    critical: &CriticalPointPolicy,
) -> Result<StepOutcome> {
    if h < 0.0 {
        return Err(Error::InvalidParameter("h must be nonnegative".into()));
    }
    if newton_tol.is_nan() || newton_tol <= 0.0 {
        return Err(Error::InvalidParameter(
            "newton_tol must be positive".into(),
        ));
    }
    let before = problem.eval_counts();
    let (i_val_x, _) = problem.eval_integral_and_gradient(x)?;
    let ft = f_tilde(tab, problem, x, h)?;
    let y = add_scaled(x, h, &ft);
    let (i_val_y, i_y) = problem.eval_integral_and_gradient(&y)?;
    let i_y_norm = norm(&i_y);
    if critical.is_critical(&y, i_y_norm) {
        return Err(Error::DegenerateGradient);
    }
    let iyiy = dot(&i_y, &i_y);
    let tol = newton_tol * (1.0 + i_val_x.abs());
    let mut lam = 0.0_f64;
    let mut updates: usize = 0;
    let mut confirmed = false;
    let mut residual = i_val_y - i_val_x;
    loop {
        if residual == 0.0 {
            break;
        }
        let within = residual.abs() <= tol;
        if within && confirmed {
            break;
        }
        if updates >= newton_max {
            if within {
                break;
            }
            return Err(Error::NonConvergence {
                iterations: newton_max,
                residual: residual.abs(),
            });
        }
        confirmed = within;
        lam -= residual / iyiy;
        updates += 1;
        let candidate = add_scaled(&y, lam, &i_y);
        residual = problem.integral().value(&candidate) - i_val_x;
        if !residual.is_finite() {
            return Err(Error::NumericalFault("projection residual".into()));
        }
    }
    let x_new = add_scaled(&y, lam, &i_y);
    let costs = cost_since(problem, before);
    Ok(StepOutcome {
        x_new,
        iterations: updates as u32,
        denom: None,
        cond: None,
        f_evals: costs.0,
        i_evals: costs.1,
        linear_solves: 0,
        ball_ratio: None,
    })
}

/// A one-step map that can drive [`integrate`].
pub trait Stepper: Send + Sync {
    fn name(&self) -> &str;
    fn step(&self, problem: &OdeProblem, x: &[f64], h: f64) -> Result<StepOutcome>;
}

/// General discrete gradient method (fixed-point solver).
pub struct DgFixedPoint {
    pub cfg: DgMethodConfig,
}

impl Stepper for DgFixedPoint {
    fn name(&self) -> &str {
        "dg_fixed_point"
    }
    fn step(&self, problem: &OdeProblem, x: &[f64], h: f64) -> Result<StepOutcome> {
        dg_step_fixed_point(&self.cfg, problem, x, h)
    }
}

/// Linearly implicit discrete gradient method for quadratic integrals.
pub struct DgLinearlyImplicit {
    pub cfg: DgMethodConfig,
}

impl Stepper for DgLinearlyImplicit {
    fn name(&self) -> &str {
        "dg_linear"
    }
    fn step(&self, problem: &OdeProblem, x: &[f64], h: f64) -> Result<StepOutcome> {
        dg_step_linearly_implicit(&self.cfg, problem, x, h)
    }
}

/// Standard projection method on top of a base tableau.
pub struct ProjectionMethod {
    pub tableau: ButcherTableau,
    pub newton_tol: f64,
    pub newton_max: usize,
    pub critical: CriticalPointPolicy,
}

impl ProjectionMethod {
    pub fn new(tableau: ButcherTableau) -> Self {
        ProjectionMethod {
            tableau,
            newton_tol: 1e-12,
            newton_max: 50,
            critical: CriticalPointPolicy::default(),
        }
    }
}

impl Stepper for ProjectionMethod {
    fn name(&self) -> &str {
        "projection"
    }
    fn step(&self, problem: &OdeProblem, x: &[f64], h: f64) -> Result<StepOutcome> {
        projection_step(
            &self.tableau,
            problem,
            x,
            h,
            self.newton_tol,
            self.newton_max,
            &self.critical,
        )
    }
}

/// Plain Runge-Kutta baseline (non-conserving).
pub struct RungeKuttaStepper {
    pub tableau: ButcherTableau,
}

impl Stepper for RungeKuttaStepper {
    fn name(&self) -> &str {
        "rk"
    }
    fn step(&self, problem: &OdeProblem, x: &[f64], h: f64) -> Result<StepOutcome> {
        let before = problem.eval_counts();
        let x_new = crate::rk::rk_step(&self.tableau, problem, x, h)?;
        let costs = cost_since(problem, before);
        Ok(StepOutcome {
            x_new,
            iterations: 0,
            denom: None,
            cond: None,
            f_evals: costs.0,
            i_evals: costs.1,
            linear_solves: 0,
            ball_ratio: None,
        })
    }
}

/// Aggregated cost of a trajectory, summed over accepted steps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CostCounters {
    pub steps: u64,
    pub f_evals: u64,
    pub i_evals: u64,
    pub linear_solves: u64,
    pub iterations: u64,
}

/// Time grid, states and integral values of one integration run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub integral_values: Vec<f64>,
    pub cost: CostCounters,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states
            .last()
            .expect("trajectory has at least one node")
    }

    /// max over nodes of |I(x_k) - I(x_0)|.
    pub fn max_integral_drift(&self) -> f64 {
        let i0 = self.integral_values[0];
        self.integral_values
            .iter()
            .fold(0.0_f64, |m, v| m.max((v - i0).abs()))
    }

    pub fn max_state_norm(&self) -> f64 {
        self.states.iter().fold(0.0_f64, |m, s| m.max(norm(s)))
    }

    /// Largest |f(x)|/|i(x)| seen along the trajectory, skipping states with
    /// |i| below 1e-12·(1+|x|). Empirical stand-in for the bound constant
    /// relating field and gradient magnitudes near critical points.
    pub fn max_field_gradient_ratio(&self, problem: &OdeProblem) -> Result<f64> {
        let mut best = 0.0_f64;
        for x in &self.states {
            let f = problem.eval_field(x)?;
            let (_, g) = problem.eval_integral_and_gradient(x)?;
            let gn = norm(&g);
            if gn > 1e-12 * (1.0 + norm(x)) {
                best = best.max(norm(&f) / gn);
            }
        }
        Ok(best)
    }
}

/// Integrate n = round(t_end/h) fixed steps, recording the integral at every
/// node and summing the per-step cost counters.
///
/// Step errors are wrapped with the index of the failing step. Trajectory
/// bookkeeping (the recorded integral values) is not charged to the method's
/// cost counters.
pub fn integrate(
    stepper: &dyn Stepper,
    problem: &OdeProblem,
    x0: &[f64],
    h: f64,
    t_end: f64,
) -> Result<Trajectory> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidParameter("h must be positive".into()));
    }
    if t_end.is_nan() || t_end < 0.0 {
        return Err(Error::InvalidParameter("t_end must be nonnegative".into()));
    }
    if x0.len() != problem.dim() || x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "initial state must be finite and of the problem dimension".into(),
        ));
    }
    let n = (t_end / h).round() as usize;
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut integral_values = Vec::with_capacity(n + 1);
    let mut cost = CostCounters::default();

    let record = |x: &[f64], values: &mut Vec<f64>| -> Result<()> {
        let v = problem.integral().value(x);
        if !v.is_finite() {
            return Err(Error::NumericalFault("integral along trajectory".into()));
        }
        values.push(v);
        Ok(())
    };

    times.push(0.0);
    states.push(x0.to_vec());
    record(x0, &mut integral_values)?;

    let mut x = x0.to_vec();
    for k in 0..n {
        let out = stepper.step(problem, &x, h).map_err(|e| Error::AtStep {
            index: k,
            source: Box::new(e),
        })?;
        cost.steps += 1;
        cost.f_evals += out.f_evals;
        cost.i_evals += out.i_evals;
        cost.linear_solves += out.linear_solves;
        cost.iterations += u64::from(out.iterations);
        x = out.x_new;
        times.push((k + 1) as f64 * h);
        states.push(x.clone());
        record(&x, &mut integral_values)?;
    }
    Ok(Trajectory {
        times,
        states,
        integral_values,
        cost,
    })
}

/// Empirical constants feeding [`theoretical_step_bound`]: a Lipschitz-type
/// constant, the ball parameter, a raw step-size cap, and the ratio bound
/// |f| ≤ C1 |i|. These are sampled estimates, not certified constants.
#[derive(Clone, Copy, Debug)]
pub struct BoundEstimates {
    pub lipschitz: f64,
    pub ball_param: f64,
    pub step_cap: f64,
    pub c1: f64,
}

impl BoundEstimates {
    pub fn new(lipschitz: f64, ball_param: f64, step_cap: f64, c1: f64) -> Result<Self> {
        for (name, v) in [
            ("L", lipschitz),
            ("R", ball_param),
            ("H", step_cap),
            ("C1", c1),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "bound estimate {name} must be positive and finite"
                )));
            }
        }
        Ok(BoundEstimates {
            lipschitz,
            ball_param,
            step_cap,
            c1,
        })
    }

    /// Estimate L and C1 from pairwise difference quotients and field/gradient
    /// ratios over the given sample states; R and H are supplied by the
    /// caller.
    pub fn estimate_from_samples(
        problem: &OdeProblem,
        samples: &[Vec<f64>],
        ball_param: f64,
        step_cap: f64,
    ) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidParameter(
                "bound estimation needs at least two samples".into(),
            ));
        }
        let fields: Vec<Vec<f64>> = samples
            .iter()
            .map(|x| problem.eval_field(x))
            .collect::<Result<_>>()?;
        let grads: Vec<Vec<f64>> = samples
            .iter()
            .map(|x| Ok(problem.eval_integral_and_gradient(x)?.1))
            .collect::<Result<_>>()?;
        let mut lipschitz = 0.0_f64;
        for a in 0..samples.len() {
            for b in a + 1..samples.len() {
                let dist = norm(&sub(&samples[a], &samples[b]));
                if dist <= 1e-12 {
                    continue;
                }
                lipschitz = lipschitz
                    .max(norm(&sub(&fields[a], &fields[b])) / dist)
                    .max(norm(&sub(&grads[a], &grads[b])) / dist);
            }
        }
        let mut c1 = 0.0_f64;
        for (x, (f, g)) in samples.iter().zip(fields.iter().zip(&grads)) {
            let gn = norm(g);
            if gn > 1e-12 * (1.0 + norm(x)) {
                c1 = c1.max(norm(f) / gn);
            }
        }
        BoundEstimates::new(lipschitz, ball_param, step_cap, c1)
    }
}

/// The step-size sufficiency constants
///
/// ```text
/// R' = max{R, 10L},   H' = min{H, 1/(10L), 1/(6 C2 R'), 1/((36 C2 + 6) L)}
/// ```
///
/// with C2 = C1 + 1/5. For any x with the estimates valid on its
/// neighbourhood, steps h < H' admit a unique solution of the step equation
/// in the ball of radius |i(x)|/R' around x, found by fixed-point iteration.
/// The bound is conservative: larger h may well converge too.
pub fn theoretical_step_bound(est: &BoundEstimates) -> Result<(f64, f64)> {
    // re-validate: the struct fields are public
    BoundEstimates::new(est.lipschitz, est.ball_param, est.step_cap, est.c1)?;
    let c2 = est.c1 + 1.0 / 5.0;
    let r_prime = est.ball_param.max(10.0 * est.lipschitz);
    let h_prime = est
        .step_cap
        .min(1.0 / (10.0 * est.lipschitz))
        .min(1.0 / (6.0 * c2 * r_prime))
        .min(1.0 / ((36.0 * c2 + 6.0) * est.lipschitz));
    Ok((r_prime, h_prime))
}

/// Deterministic uniform samples in [lo, hi]^dim, for bound estimation and
/// property sweeps.
pub fn uniform_samples(dim: usize, count: usize, lo: f64, hi: f64, seed: u64) -> Vec<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..dim).map(|_| rng.gen_range(lo..hi)).collect())
        .collect()
}
