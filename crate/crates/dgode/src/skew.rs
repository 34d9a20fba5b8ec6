//! The default skew matrix S(x) and its two-point discretization S̃(x,x',h).
//!
//! On {i(x) ≠ 0} the system ẋ = f(x) can be rewritten as ẋ = S(x) i(x) with
//! the skew-symmetric default formula S = (f iᵀ - i fᵀ)/|i|². The step maps
//! discretize S by replacing f with a consistent f̃ and i with consistent
//! approximations ĩ, î, ĭ; skew-symmetry of the result is what makes the
//! integral conserved exactly, so the assembly here keeps it exact up to
//! rounding by construction.

use crate::discrete_gradient::{discrete_gradient, DiscreteGradientKind};
use crate::error::{Error, Result};
use crate::linalg::{add_scaled, dot, DenseMatrix};
use crate::problems::OdeProblem;

/// Where a gradient-like factor of S̃ is evaluated.
///
/// `AtY` and `DgAtY` use the auxiliary point y = x + h f̃(x,h) of the
/// underlying one-step method; the shipped f̃ providers do not depend on x',
/// so y is explicit and computed once per step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientApproxChoice {
    /// i(x)
    AtX,
    /// i(x')
    AtXPrime,
    /// ½(i(x) + i(x'))
    Average,
    /// i((x + x')/2)
    AtMidpoint,
    /// the discrete gradient ī(x, x')
    DiscreteGrad,
    /// i(y) with y = x + h f̃(x,h)
    AtY,
    /// ī(x, y) with y = x + h f̃(x,h)
    DgAtY,
}

impl GradientApproxChoice {
    pub const ALL: [GradientApproxChoice; 7] = [
        GradientApproxChoice::AtX,
        GradientApproxChoice::AtXPrime,
        GradientApproxChoice::Average,
        GradientApproxChoice::AtMidpoint,
        GradientApproxChoice::DiscreteGrad,
        GradientApproxChoice::AtY,
        GradientApproxChoice::DgAtY,
    ];
}

/// Assembly recipe for S̃ = (f̃ ĩᵀ - ĩ f̃ᵀ)/(î · ĭ).
#[derive(Clone, Debug)]
pub struct SkewConfig {
    pub i_tilde: GradientApproxChoice,
    pub i_hat: GradientApproxChoice,
    pub i_breve: GradientApproxChoice,
    pub dg_kind: DiscreteGradientKind,
    /// Fraction δ of |i(x)|² below which the denominator rejects the step.
    /// The contraction analysis guarantees î·ĭ > ½|i|² for admissible h, so a
    /// violated floor is evidence h is too large; the step is rejected rather
    /// than regularized, since regularizing would break exact conservation.
    pub denom_floor: f64,
}

impl SkewConfig {
    /// The linearly implicit recipe for quadratic integrals:
    /// ĩ = î = i(x), ĭ = ī(x,y), midpoint discrete gradient.
    pub fn linearly_implicit() -> Self {
        SkewConfig {
            i_tilde: GradientApproxChoice::AtX,
            i_hat: GradientApproxChoice::AtX,
            i_breve: GradientApproxChoice::DgAtY,
            dg_kind: DiscreteGradientKind::MidpointQuadratic,
            denom_floor: 0.5,
        }
    }
}

impl Default for SkewConfig {
    fn default() -> Self {
        SkewConfig::linearly_implicit()
    }
}

/// (u vᵀ - v uᵀ) / denom. Entry (r,c) and entry (c,r) are computed from the
/// same two products, so the result is skew-symmetric exactly in floating
/// point.
pub(crate) fn skew_outer(u: &[f64], v: &[f64], denom: f64) -> DenseMatrix {
    let d = u.len();
    let mut m = DenseMatrix::zeros(d);
    for r in 0..d {
        for c in 0..d {
            m.set(r, c, (u[r] * v[c] - v[r] * u[c]) / denom);
        }
    }
    m
}

/// The default formula S = (f iᵀ - i fᵀ)/|i|².
///
/// If f·i = 0 (the first-integral condition) then S i = f.
pub fn default_skew(f_val: &[f64], i_val: &[f64]) -> Result<DenseMatrix> {
    if f_val.len() != i_val.len() {
        return Err(Error::InvalidParameter(
            "default_skew: dimension mismatch".into(),
        ));
    }
    let n2 = dot(i_val, i_val);
    if n2 == 0.0 {
        return Err(Error::DegenerateGradient);
    }
    Ok(skew_outer(f_val, i_val, n2))
}

struct ChoiceResolver<'a> {
    problem: &'a OdeProblem,
    dg_kind: &'a DiscreteGradientKind,
    x: &'a [f64],
    xp: &'a [f64],
    h: f64,
    f_tilde_val: &'a [f64],
    i_x: Vec<f64>,
    i_xp: Option<Vec<f64>>,
    y: Option<Vec<f64>>,
    i_y: Option<Vec<f64>>,
    i_mid: Option<Vec<f64>>,
    dg_xp: Option<Vec<f64>>,
    dg_y: Option<Vec<f64>>,
}

impl<'a> ChoiceResolver<'a> {
    fn i_xp(&mut self) -> Vec<f64> {
        self.i_xp
            .get_or_insert_with(|| self.problem.integral().gradient(self.xp))
            .clone()
    }

    /// y = x + h f̃(x,h); computed once and shared by every choice that uses it.
    fn y(&mut self) -> Vec<f64> {
        self.y
            .get_or_insert_with(|| add_scaled(self.x, self.h, self.f_tilde_val))
            .clone()
    }

    fn resolve(&mut self, choice: GradientApproxChoice) -> Result<Vec<f64>> {
        Ok(match choice {
            GradientApproxChoice::AtX => self.i_x.clone(),
            GradientApproxChoice::AtXPrime => self.i_xp(),
            GradientApproxChoice::Average => {
                let ixp = self.i_xp();
                self.i_x
                    .iter()
                    .zip(&ixp)
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect()
            }
            GradientApproxChoice::AtMidpoint => self
                .i_mid
                .get_or_insert_with(|| {
                    let mid: Vec<f64> = self
                        .x
                        .iter()
                        .zip(self.xp)
                        .map(|(a, b)| 0.5 * (a + b))
                        .collect();
                    self.problem.integral().gradient(&mid)
                })
                .clone(),
            GradientApproxChoice::DiscreteGrad => match &self.dg_xp {
                Some(v) => v.clone(),
                None => {
                    let v =
                        discrete_gradient(self.dg_kind, self.problem.integral(), self.x, self.xp)?;
                    self.dg_xp = Some(v.clone());
                    v
                }
            },
            GradientApproxChoice::AtY => {
                let y = self.y();
                self.i_y
                    .get_or_insert_with(|| self.problem.integral().gradient(&y))
                    .clone()
            }
            GradientApproxChoice::DgAtY => match &self.dg_y {
                Some(v) => v.clone(),
                None => {
                    let y = self.y();
                    let v = discrete_gradient(self.dg_kind, self.problem.integral(), self.x, &y)?;
                    self.dg_y = Some(v.clone());
                    v
                }
            },
        })
    }
}

/// Assemble S̃(x,x',h) per the configured choices, returning the matrix and
/// the raw denominator î·ĭ.
///
/// The caller is responsible for the critical-point branch; here the step is
/// rejected when the denominator falls to `denom_floor · |i(x)|²` or below,
/// signalling that h must shrink.
pub fn discrete_skew(
    cfg: &SkewConfig,
    problem: &OdeProblem,
    f_tilde_val: &[f64],
    x: &[f64],
    xp: &[f64],
    h: f64,
) -> Result<(DenseMatrix, f64)> {
    if cfg.denom_floor.is_nan() || cfg.denom_floor <= 0.0 || cfg.denom_floor > 1.0 {
        return Err(Error::InvalidParameter(
            "denom_floor must lie in (0, 1]".into(),
        ));
    }
    if h < 0.0 {
        return Err(Error::InvalidParameter("h must be nonnegative".into()));
    }
    let i_x = problem.integral().gradient(x);
    let i_x_norm2 = dot(&i_x, &i_x);
    if i_x_norm2 == 0.0 {
        return Err(Error::DegenerateGradient);
    }
    let mut resolver = ChoiceResolver {
        problem,
        dg_kind: &cfg.dg_kind,
        x,
        xp,
        h,
        f_tilde_val,
        i_x,
        i_xp: None,
        y: None,
        i_y: None,
        i_mid: None,
        dg_xp: None,
        dg_y: None,
    };
    let i_tilde = resolver.resolve(cfg.i_tilde)?;
    let i_hat = resolver.resolve(cfg.i_hat)?;
    let i_breve = resolver.resolve(cfg.i_breve)?;
    let denom = dot(&i_hat, &i_breve);
    let floor = cfg.denom_floor * i_x_norm2;
    if denom <= floor {
        return Err(Error::StepRejected { denom, floor });
    }
    Ok((skew_outer(f_tilde_val, &i_tilde, denom), denom))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;
    use crate::problems::rigid_body_modified;

    const X0: [f64; 3] = [0.4535961214255773, 0.0, 0.8912073600614354];

    #[test]
    fn default_skew_orthogonal_example() {
        let s = default_skew(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(s.get(0, 0), 0.0);
        assert_eq!(s.get(0, 1), 1.0);
        assert_eq!(s.get(1, 0), -1.0);
        assert_eq!(s.get(1, 1), 0.0);
        assert_eq!(s.matvec(&[0.0, 1.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn default_skew_parallel_is_zero() {
        let v = [0.3, -0.7, 1.1];
        let s = default_skew(&v, &v).unwrap();
        assert_eq!(s.max_abs(), 0.0);
    }

    #[test]
    fn default_skew_zero_gradient_rejected() {
        assert!(matches!(
            default_skew(&[1.0, 0.0], &[0.0, 0.0]),
            Err(Error::DegenerateGradient)
        ));
    }

    #[test]
    fn discrete_skew_consistency_at_diagonal() {
        let p = rigid_body_modified(2.0, 1.0, 2.0 / 3.0, 1.0).unwrap();
        let f = p.eval_field(&X0).unwrap();
        let (_, i) = p.eval_integral_and_gradient(&X0).unwrap();
        let s_exact = default_skew(&f, &i).unwrap();
        // every choice reduces to i(x) at xp = x, h = 0
        for choice in GradientApproxChoice::ALL {
            let cfg = SkewConfig {
                i_tilde: choice,
                i_hat: choice,
                i_breve: choice,
                ..SkewConfig::default()
            };
            let (s, denom) = discrete_skew(&cfg, &p, &f, &X0, &X0, 0.0).unwrap();
            for r in 0..3 {
                for c in 0..3 {
                    assert!(
                        (s.get(r, c) - s_exact.get(r, c)).abs() <= 1e-15,
                        "{choice:?} entry ({r},{c})"
                    );
                }
            }
            assert!((denom - 1.8385011172553457).abs() <= 1e-12);
        }
    }

    #[test]
    fn denominator_floor_rejects() {
        let p = rigid_body_modified(2.0, 1.0, 2.0 / 3.0, 1.0).unwrap();
        let f = p.eval_field(&X0).unwrap();
        // i(-x) = -i(x) makes the denominator negative
        let cfg = SkewConfig {
            i_hat: GradientApproxChoice::AtX,
            i_breve: GradientApproxChoice::AtXPrime,
            ..SkewConfig::default()
        };
        let neg: Vec<f64> = X0.iter().map(|v| -v).collect();
        assert!(matches!(
            discrete_skew(&cfg, &p, &f, &X0, &neg, 0.5),
            Err(Error::StepRejected { .. })
        ));
    }

    #[test]
    fn invalid_floor_rejected() {
        let p = rigid_body_modified(2.0, 1.0, 2.0 / 3.0, 1.0).unwrap();
        let f = p.eval_field(&X0).unwrap();
        let cfg = SkewConfig {
            denom_floor: 0.0,
            ..SkewConfig::default()
        };
        assert!(discrete_skew(&cfg, &p, &f, &X0, &X0, 0.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn symmetry_and_range_identity(
                fv in proptest::collection::vec(-3.0f64..3.0, 3),
                iv in proptest::collection::vec(-3.0f64..3.0, 3),
            ) {
                prop_assume!(norm(&iv) > 0.1);
                let s = default_skew(&fv, &iv).unwrap();
                let scale = s.max_abs().max(1e-300);
                for r in 0..3 {
                    for c in 0..3 {
                        prop_assert!((s.get(r, c) + s.get(c, r)).abs() <= 1e-15 * scale);
                    }
                }
                // S i = f - i (f·i)/|i|² for arbitrary f
                let n2 = dot(&iv, &iv);
                let proj = dot(&fv, &iv) / n2;
                let si = s.matvec(&iv);
                for k in 0..3 {
                    let expected = fv[k] - iv[k] * proj;
                    prop_assert!((si[k] - expected).abs() <= 1e-13 * (1.0 + norm(&fv)));
                }
            }

            #[test]
            fn discrete_skew_is_skew(
                xs in proptest::collection::vec(-2.0f64..2.0, 3),
                xps in proptest::collection::vec(-2.0f64..2.0, 3),
                h in 0.0f64..0.5,
            ) {
                let p = rigid_body_modified(2.0, 1.0, 2.0 / 3.0, 1.0).unwrap();
                let (_, i) = p.eval_integral_and_gradient(&xs).unwrap();
                prop_assume!(norm(&i) > 0.1);
                let ft = p.eval_field(&xs).unwrap(); // any consistent stand-in
                let cfg = SkewConfig {
                    i_tilde: GradientApproxChoice::Average,
                    i_hat: GradientApproxChoice::AtMidpoint,
                    i_breve: GradientApproxChoice::DiscreteGrad,
                    ..SkewConfig::default()
                };
                if let Ok((s, _)) = discrete_skew(&cfg, &p, &ft, &xs, &xps, h) {
                    let scale = s.max_abs().max(1e-300);
                    for r in 0..3 {
                        for c in 0..3 {
                            prop_assert!((s.get(r, c) + s.get(c, r)).abs() <= 1e-14 * scale);
                        }
                    }
                }
            }
        }
    }
}
