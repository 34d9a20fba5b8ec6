//! Runge-Kutta machinery: Butcher tableaus, stage solves and the f̃ provider
//! used by the conserving step maps. A plain (non-conserving) RK step is also
//! exposed as the baseline integrator.
//!
//! Systems here are autonomous, so tableaus carry no abscissae.

use crate::error::{Error, Result};
use crate::linalg::{add_scaled, norm, sub};
use crate::problems::OdeProblem;

/// Default absolute tolerance on the max stage change for implicit solves.
pub const STAGE_TOL: f64 = 1e-14;
/// Default iteration cap for implicit stage solves.
pub const STAGE_MAX_ITER: usize = 100;

/// Runge-Kutta coefficients (A, b) with a user-asserted order.
///
/// Construction enforces consistency Σbᵢ = 1 (to 1e-14), which the
/// discrete-gradient construction needs for f̃(x,0) = f(x). `claimed_order`
/// is not derived from order conditions; the order study checks it
/// empirically.
#[derive(Clone, Debug)]
pub struct ButcherTableau {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    claimed_order: usize,
    explicit: bool,
}

impl ButcherTableau {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>, claimed_order: usize) -> Result<Self> {
        let s = b.len();
        if s == 0 || a.len() != s || a.iter().any(|row| row.len() != s) {
            return Err(Error::InvalidParameter(
                "tableau: A must be s x s and b length s".into(),
            ));
        }
        if claimed_order == 0 {
            return Err(Error::InvalidParameter(
                "tableau: claimed order must be positive".into(),
            ));
        }
        let sum: f64 = b.iter().sum();
        if (sum - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidParameter(format!(
                "tableau: weights must sum to 1 (got {sum:.17e})"
            )));
        }
        let explicit = (0..s).all(|i| (i..s).all(|j| a[i][j] == 0.0));
        Ok(ButcherTableau {
            a,
            b,
            claimed_order,
            explicit,
        })
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn weights(&self) -> &[f64] {
        &self.b
    }

    pub fn claimed_order(&self) -> usize {
        self.claimed_order
    }

    /// True iff a_ij = 0 for all i ≤ j (strictly lower triangular A).
    pub fn is_explicit(&self) -> bool {
        self.explicit
    }
}

/// The classical explicit 4th-order tableau.
pub fn rk4_classic() -> ButcherTableau {
    ButcherTableau::new(
        vec![
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.5, 0.0, 0.0, 0.0],
            vec![0.0, 0.5, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ],
        vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
        4,
    )
    .expect("classical tableau is valid")
}

/// Explicit Euler.
pub fn euler_explicit() -> ButcherTableau {
    ButcherTableau::new(vec![vec![0.0]], vec![1.0], 1).expect("euler tableau is valid")
}

/// Implicit midpoint rule (one stage, A = [[1/2]]).
pub fn implicit_midpoint() -> ButcherTableau {
    ButcherTableau::new(vec![vec![0.5]], vec![1.0], 2).expect("midpoint tableau is valid")
}

/// Stage derivatives; column i is kᵢ.
#[derive(Clone, Debug)]
pub struct StageMatrix {
    columns: Vec<Vec<f64>>,
}

impl StageMatrix {
    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Σᵢ wᵢ kᵢ.
    pub fn weighted_sum(&self, weights: &[f64]) -> Vec<f64> {
        let d = self.columns[0].len();
        let mut out = vec![0.0; d];
        for (w, col) in weights.iter().zip(&self.columns) {
            for (o, k) in out.iter_mut().zip(col) {
                *o += w * k;
            }
        }
        out
    }
}

fn stage_argument(u: &[f64], h: f64, row: &[f64], columns: &[Vec<f64>], upto: usize) -> Vec<f64> {
    let mut arg = u.to_vec();
    for (j, col) in columns.iter().enumerate().take(upto) {
        let c = h * row[j];
        if c != 0.0 {
            for (a, k) in arg.iter_mut().zip(col) {
                *a += c * k;
            }
        }
    }
    arg
}

/// Solve the stage equations kᵢ = f(u + h Σⱼ aᵢⱼ kⱼ).
///
/// Explicit tableaus use forward substitution and evaluate f exactly s times.
/// Implicit tableaus iterate K ← T(K) from all columns equal to f(u) until the
/// largest column change drops to `tol` (absolute), which is the contraction
/// map of the stage existence argument.
pub fn rk_stages(
    tab: &ButcherTableau,
    problem: &OdeProblem,
    u: &[f64],
    h: f64,
    tol: f64,
    max_iter: usize,
) -> Result<StageMatrix> {
    if h < 0.0 {
        return Err(Error::InvalidParameter("h must be nonnegative".into()));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter("stage tol must be positive".into()));
    }
    let s = tab.stages();
    if tab.is_explicit() {
        let mut columns: Vec<Vec<f64>> = Vec::with_capacity(s);
        for i in 0..s {
            let arg = stage_argument(u, h, &tab.a[i], &columns, i);
            columns.push(problem.eval_field(&arg)?);
        }
        return Ok(StageMatrix { columns });
    }

    let start = problem.eval_field(u)?;
    let mut columns: Vec<Vec<f64>> = vec![start; s];
    let mut last_change = f64::INFINITY;
    for _ in 0..max_iter {
        let mut next: Vec<Vec<f64>> = Vec::with_capacity(s);
        for i in 0..s {
            let arg = stage_argument(u, h, &tab.a[i], &columns, s);
            next.push(problem.eval_field(&arg)?);
        }
        last_change = columns
            .iter()
            .zip(&next)
            .map(|(old, new)| norm(&sub(new, old)))
            .fold(0.0_f64, f64::max);
        columns = next;
        if last_change <= tol {
            return Ok(StageMatrix { columns });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: last_change,
    })
}

/// f̃(x,h) = Σᵢ bᵢ kᵢ, the one-step increment slope of the tableau.
///
/// Satisfies f̃(x,0) = f(x); at h = 0 every stage equals f(x), so the first
/// column is returned directly rather than resumming the weights.
pub fn f_tilde(tab: &ButcherTableau, problem: &OdeProblem, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let stages = rk_stages(tab, problem, x, h, STAGE_TOL, STAGE_MAX_ITER)?;
    if h == 0.0 {
        return Ok(stages.columns()[0].clone());
    }
    Ok(stages.weighted_sum(tab.weights()))
}

/// One plain Runge-Kutta step x' = x + h f̃(x,h). Baseline, non-conserving.
pub fn rk_step(tab: &ButcherTableau, problem: &OdeProblem, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let ft = f_tilde(tab, problem, x, h)?;
    Ok(add_scaled(x, h, &ft))
}
