//! ODE problems carrying a conserved first integral, plus the shipped
//! benchmark systems.
//!
//! A problem is the pair (f, I) for the autonomous system ẋ = f(x) with
//! I(x(t)) constant along solutions, i.e. ∇I(x)·f(x) = 0 everywhere. States
//! are plain `Vec<f64>` of the problem dimension. All evaluations are pure;
//! problems are immutable after construction and safe to share across
//! threads. Evaluation counters (used by the cost diagnostics) are atomic.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::linalg::{norm, DenseMatrix};

type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type VectorFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// Quadratic description `I(x) = ½ xᵀMx + bᵀx + c` with symmetric `M`.
///
/// Methods that are linearly implicit in the new state require this form;
/// general integrals only support the iterative steppers.
#[derive(Clone, Debug)]
pub struct QuadraticForm {
    pub matrix: DenseMatrix,
    pub linear: Vec<f64>,
    pub constant: f64,
}

impl QuadraticForm {
    /// Validates symmetry of `M` (entrywise to 1e-14 of the largest entry)
    /// and dimension agreement with `b`.
    pub fn new(matrix: DenseMatrix, linear: Vec<f64>, constant: f64) -> Result<Self> {
        if linear.len() != matrix.dim() {
            return Err(Error::InvalidParameter(
                "quadratic form: b dimension must match M".into(),
            ));
        }
        let scale = matrix.max_abs().max(1.0);
        for r in 0..matrix.dim() {
            for c in r + 1..matrix.dim() {
                if (matrix.get(r, c) - matrix.get(c, r)).abs() > 1e-14 * scale {
                    return Err(Error::InvalidParameter(
                        "quadratic form: M must be symmetric".into(),
                    ));
                }
            }
        }
        Ok(QuadraticForm {
            matrix,
            linear,
            constant,
        })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        0.5 * crate::linalg::dot(x, &self.matrix.matvec(x))
            + crate::linalg::dot(&self.linear, x)
            + self.constant
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.matrix.matvec(x);
        for (gi, bi) in g.iter_mut().zip(&self.linear) {
            *gi += bi;
        }
        g
    }
}

/// A first integral I with its gradient i(x) = ∇I(x), supplied analytically.
///
/// Every call through [`value`](Self::value), [`gradient`](Self::gradient) or
/// [`value_and_gradient`](Self::value_and_gradient) increments an internal
/// evaluation counter; each call counts once regardless of which pieces it
/// returns, so the counters mirror calls to the user's integral oracle.
pub struct FirstIntegral {
    eval: Box<ScalarFn>,
    grad: Box<VectorFn>,
    quadratic: Option<QuadraticForm>,
    evals: AtomicU64,
}

impl FirstIntegral {
    /// General integral from closures. No quadratic form is attached, so the
    /// linearly implicit stepper will refuse this integral.
    pub fn new<E, G>(eval: E, grad: G) -> Self
    where
        E: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        FirstIntegral {
            eval: Box::new(eval),
            grad: Box::new(grad),
            quadratic: None,
            evals: AtomicU64::new(0),
        }
    }

    /// Integral defined by a quadratic form; the gradient is evaluated as
    /// `Mx + b`.
    pub fn from_quadratic(form: QuadraticForm) -> Self {
        let f1 = form.clone();
        let f2 = form.clone();
        FirstIntegral {
            eval: Box::new(move |x| f1.value(x)),
            grad: Box::new(move |x| f2.gradient(x)),
            quadratic: Some(form),
            evals: AtomicU64::new(0),
        }
    }

    pub fn quadratic_form(&self) -> Option<&QuadraticForm> {
        self.quadratic.as_ref()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.evals.fetch_add(1, Ordering::Relaxed);
        (self.eval)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.evals.fetch_add(1, Ordering::Relaxed);
        (self.grad)(x)
    }

    pub fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.evals.fetch_add(1, Ordering::Relaxed);
        ((self.eval)(x), (self.grad)(x))
    }

    pub fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }
}

impl std::fmt::Debug for FirstIntegral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FirstIntegral")
            .field("quadratic", &self.quadratic.is_some())
            .finish()
    }
}

/// Threshold policy for the critical-point branch `x' = x`.
///
/// The method definitions branch on i(x) = 0 exactly; in finite arithmetic
/// the branch is taken when |i(x)| ≤ epsilon_crit · (1 + |x|).
#[derive(Clone, Copy, Debug)]
pub struct CriticalPointPolicy {
    epsilon_crit: f64,
}

impl CriticalPointPolicy {
    pub fn new(epsilon_crit: f64) -> Result<Self> {
        if epsilon_crit.is_nan() || epsilon_crit < 0.0 {
            return Err(Error::InvalidParameter(
                "epsilon_crit must be nonnegative".into(),
            ));
        }
        Ok(CriticalPointPolicy { epsilon_crit })
    }

    pub fn epsilon_crit(&self) -> f64 {
        self.epsilon_crit
    }

    pub fn threshold(&self, x: &[f64]) -> f64 {
        self.epsilon_crit * (1.0 + norm(x))
    }

    pub fn is_critical(&self, x: &[f64], gradient_norm: f64) -> bool {
        gradient_norm <= self.threshold(x)
    }
}

impl Default for CriticalPointPolicy {
    fn default() -> Self {
        CriticalPointPolicy {
            epsilon_crit: 1e-14,
        }
    }
}

/// Counters accumulated by a problem since construction (or the last reset).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalCounts {
    pub field: u64,
    pub integral: u64,
}

/// An autonomous ODE ẋ = f(x) with one conserved first integral.
pub struct OdeProblem {
    dim: usize,
    name: String,
    field: Box<VectorFn>,
    integral: FirstIntegral,
    field_evals: AtomicU64,
}

impl OdeProblem {
    pub fn new<F>(
        name: impl Into<String>,
        dim: usize,
        field: F,
        integral: FirstIntegral,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        Ok(OdeProblem {
            dim,
            name: name.into(),
            field: Box::new(field),
            integral,
            field_evals: AtomicU64::new(0),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn integral(&self) -> &FirstIntegral {
        &self.integral
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "state dimension {} does not match problem dimension {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Evaluate f(x), failing fast on NaN/Inf output.
    pub fn eval_field(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        self.field_evals.fetch_add(1, Ordering::Relaxed);
        let out = (self.field)(x);
        if out.len() != self.dim || out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFault(format!("field of {}", self.name)));
        }
        Ok(out)
    }

    /// Evaluate (I(x), i(x)), failing fast on NaN/Inf output.
    pub fn eval_integral_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_dim(x)?;
        let (value, grad) = self.integral.value_and_gradient(x);
        if !value.is_finite() || grad.len() != self.dim || grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFault(format!("integral of {}", self.name)));
        }
        Ok((value, grad))
    }

    pub fn eval_counts(&self) -> EvalCounts {
        EvalCounts {
            field: self.field_evals.load(Ordering::Relaxed),
            integral: self.integral.eval_count(),
        }
    }
}

impl std::fmt::Debug for OdeProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OdeProblem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish()
    }
}

/// Rigid body motion in three dimensions, augmented with a perturbation
/// controlled by `alpha`. The equations are
///
/// ```text
/// ẋ = [      0        -x3   x2 - α x1² ] [ x1/I1 ]
///     [     x3          0      -x1     ] [ x2/I2 ]
///     [ -x2 + α x1²    x1        0     ] [ x3/I3 ]
/// ```
///
/// For alpha = 0 this is the classical rigid body (angular momentum in the
/// body frame, with principal moments of inertia I1, I2, I3), which has two
/// quadratic invariants. For alpha ≠ 0 the only first integral is
/// I(x) = ½(x1²/I1 + x2²/I2 + x3²/I3), carried here as a quadratic form so
/// the linearly implicit stepper applies.
pub fn rigid_body_modified(i1: f64, i2: f64, i3: f64, alpha: f64) -> Result<OdeProblem> {
    for (name, v) in [("I1", i1), ("I2", i2), ("I3", i3)] {
        if v == 0.0 || !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "moment parameter {name} must be nonzero and finite"
            )));
        }
    }
    if !alpha.is_finite() {
        return Err(Error::InvalidParameter("alpha must be finite".into()));
    }
    let (w1, w2, w3) = (1.0 / i1, 1.0 / i2, 1.0 / i3);
    let field = move |x: &[f64]| {
        let (v1, v2, v3) = (x[0] * w1, x[1] * w2, x[2] * w3);
        let a_term = alpha * x[0] * x[0];
        vec![
            -x[2] * v2 + (x[1] - a_term) * v3,
            x[2] * v1 - x[0] * v3,
            (-x[1] + a_term) * v1 + x[0] * v2,
        ]
    };
    let form = QuadraticForm::new(DenseMatrix::diagonal(&[w1, w2, w3]), vec![0.0; 3], 0.0)?;
    OdeProblem::new(
        "rigid_body_modified",
        3,
        field,
        FirstIntegral::from_quadratic(form),
    )
}

/// Planar harmonic oscillator ẋ = (-x2, x1) with I(x) = ½|x|². Solutions are
/// rotations, so the closed form is available for reference checks.
pub fn harmonic_oscillator() -> OdeProblem {
    let form = QuadraticForm::new(DenseMatrix::identity(2), vec![0.0; 2], 0.0)
        .expect("identity form is valid");
    OdeProblem::new(
        "harmonic",
        2,
        |x: &[f64]| vec![-x[1], x[0]],
        FirstIntegral::from_quadratic(form),
    )
    .expect("harmonic problem is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) const X0: [f64; 3] = [0.4535961214255773, 0.0, 0.8912073600614354];

    fn bench_problem() -> OdeProblem {
        rigid_body_modified(2.0, 1.0, 2.0 / 3.0, 1.0).unwrap()
    }

    #[test]
    fn origin_is_critical() {
        let p = bench_problem();
        let zero = vec![0.0; 3];
        assert_eq!(p.eval_field(&zero).unwrap(), vec![0.0, 0.0, 0.0]);
        let (v, g) = p.eval_integral_and_gradient(&zero).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn field_at_benchmark_start() {
        let p = bench_problem();
        let f = p.eval_field(&X0).unwrap();
        let expected = [-0.2750481247193201, -0.4042482019097951, 0.0466635742959834];
        for (a, b) in f.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        let (value, grad) = p.eval_integral_and_gradient(&X0).unwrap();
        assert!((value - 0.6471252793138364).abs() < 1e-12);
        let gexp = [0.2267980607127887, 0.0, 1.336811040092153];
        for (a, b) in grad.iter().zip(gexp) {
            assert!((a - b).abs() < 1e-12);
        }
        // first-integral condition at the start point
        assert!(dot(&grad, &f).abs() <= 1e-15);
    }

    #[test]
    fn zero_moment_rejected() {
        assert!(matches!(
            rigid_body_modified(0.0, 1.0, 1.0, 1.0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn orthogonality_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in [
            bench_problem(),
            rigid_body_modified(2.0, 1.0, 2.0 / 3.0, 0.0).unwrap(),
        ] {
            for _ in 0..100 {
                let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let f = p.eval_field(&x).unwrap();
                let (_, g) = p.eval_integral_and_gradient(&x).unwrap();
                let res = dot(&g, &f).abs();
                assert!(res <= 1e-12 * (1.0 + norm(&g) * norm(&f)));
            }
        }
        let p = harmonic_oscillator();
        for _ in 0..100 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let f = p.eval_field(&x).unwrap();
            let (_, g) = p.eval_integral_and_gradient(&x).unwrap();
            assert!(dot(&g, &f).abs() <= 1e-12 * (1.0 + norm(&g) * norm(&f)));
        }
    }

    #[test]
    fn alpha_zero_reduces_to_classical_field() {
        // classical rigid body: same skew matrix with the alpha terms absent
        let (i1, i2, i3) = (2.0, 1.0, 2.0 / 3.0);
        let classical = |x: &[f64]| -> Vec<f64> {
            let (v1, v2, v3) = (x[0] / i1, x[1] / i2, x[2] / i3);
            vec![
                -x[2] * v2 + x[1] * v3,
                x[2] * v1 - x[0] * v3,
                -x[1] * v1 + x[0] * v2,
            ]
        };
        let p = rigid_body_modified(i1, i2, i3, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            assert_eq!(p.eval_field(&x).unwrap(), classical(&x));
        }
    }

    #[test]
    fn alpha_zero_keeps_second_invariant() {
        // for alpha = 0, ½|x|² is also conserved: x·f(x) = 0
        let p = rigid_body_modified(2.0, 1.0, 2.0 / 3.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let f = p.eval_field(&x).unwrap();
            assert!(dot(&x, &f).abs() <= 1e-14 * (1.0 + norm(&x) * norm(&f)));
        }
    }

    #[test]
    fn quadratic_examples() {
        let p = harmonic_oscillator();
        assert_eq!(p.eval_field(&[1.0, 0.0]).unwrap(), vec![0.0, 1.0]);
        let (v, g) = p.eval_integral_and_gradient(&[3.0, 4.0]).unwrap();
        assert_eq!(v, 12.5);
        assert_eq!(g, vec![3.0, 4.0]);
        let (v0, g0) = p.eval_integral_and_gradient(&[0.0, 0.0]).unwrap();
        assert_eq!(v0, 0.0);
        assert_eq!(g0, vec![0.0, 0.0]);
        // at the origin with b = 0 a quadratic integral returns (c, 0)
        let shifted = QuadraticForm::new(DenseMatrix::identity(2), vec![0.0; 2], 3.0).unwrap();
        let integral = FirstIntegral::from_quadratic(shifted);
        assert_eq!(integral.value(&[0.0, 0.0]), 3.0);
        assert_eq!(integral.gradient(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn closure_gradient_matches_attached_form() {
        // user-supplied closures checked against the quadratic description
        let form = QuadraticForm::new(
            DenseMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap(),
            vec![0.25, -1.0],
            3.0,
        )
        .unwrap();
        let integral = FirstIntegral::new(
            |x: &[f64]| {
                x[0] * x[0] + 0.5 * x[1] * x[1] + 0.5 * x[0] * x[1] + 0.25 * x[0] - x[1] + 3.0
            },
            |x: &[f64]| vec![2.0 * x[0] + 0.5 * x[1] + 0.25, 0.5 * x[0] + x[1] - 1.0],
        );
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let g = integral.gradient(&x);
            let gq = form.gradient(&x);
            let diff = norm(&crate::linalg::sub(&g, &gq));
            assert!(diff <= 1e-13 * (1.0 + norm(&x)));
            assert!(
                (integral.value(&x) - form.value(&x)).abs() <= 1e-13 * (1.0 + form.value(&x).abs())
            );
        }
    }

    #[test]
    fn asymmetric_form_rejected() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 0.5], vec![0.2, 1.0]]).unwrap();
        assert!(QuadraticForm::new(m, vec![0.0; 2], 0.0).is_err());
    }

    #[test]
    fn non_finite_field_faults() {
        let integral = FirstIntegral::new(|_| 0.0, |x: &[f64]| vec![0.0; x.len()]);
        let p = OdeProblem::new("bad", 1, |x: &[f64]| vec![1.0 / (x[0] - x[0])], integral).unwrap();
        assert!(matches!(
            p.eval_field(&[1.0]),
            Err(Error::NumericalFault(_))
        ));

        let integral = FirstIntegral::new(|_| f64::NAN, |x: &[f64]| vec![0.0; x.len()]);
        let p = OdeProblem::new("bad_i", 1, |x: &[f64]| x.to_vec(), integral).unwrap();
        assert!(matches!(
            p.eval_integral_and_gradient(&[1.0]),
            Err(Error::NumericalFault(_))
        ));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = bench_problem();
        assert!(p.eval_field(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn counters_track_evaluations() {
        let p = bench_problem();
        let before = p.eval_counts();
        let _ = p.eval_field(&X0).unwrap();
        let _ = p.eval_integral_and_gradient(&X0).unwrap();
        let _ = p.integral().gradient(&X0);
        let after = p.eval_counts();
        assert_eq!(after.field - before.field, 1);
        assert_eq!(after.integral - before.integral, 2);
    }

    #[test]
    fn critical_policy_threshold() {
        let pol = CriticalPointPolicy::default();
        assert!(pol.is_critical(&[0.0; 3], 0.0));
        assert!(!pol.is_critical(&X0, 1.0));
        assert!(CriticalPointPolicy::new(-1.0).is_err());
    }
}
