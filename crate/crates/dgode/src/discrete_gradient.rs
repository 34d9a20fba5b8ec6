//! Discrete gradients: two-point vector functions ī(x, x') satisfying
//!
//! ```text
//! ī(x,x') · (x' - x) = I(x') - I(x)      and      ī(x,x) = i(x).
//! ```
//!
//! This identity is what makes the step maps conserve I exactly, so the
//! shipped kinds are tested against it directly.

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::problems::FirstIntegral;

/// The shipped discrete-gradient constructions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DiscreteGradientKind {
    /// ī(x,x') = i((x+x')/2). For quadratic I this equals ½(i(x)+i(x')) and
    /// is linear in x'; it is only valid when the integral carries a
    /// quadratic form.
    MidpointQuadratic,
    /// Mean value (averaged vector field) gradient: the line integral of i
    /// along the segment from x to x', approximated by Gauss-Legendre
    /// quadrature with `nodes` points. Exact whenever the integrand is a
    /// polynomial of degree ≤ 2·nodes - 1 along the segment.
    MeanValue { nodes: usize },
    /// Itoh-Abe coordinate increment gradient: componentwise difference
    /// quotients along the staircase path in natural index order 1..d. The
    /// ordering is part of the method identity.
    CoordinateIncrement,
}

impl DiscreteGradientKind {
    pub fn mean_value_default() -> Self {
        DiscreteGradientKind::MeanValue { nodes: 3 }
    }
}

/// Relative threshold below which a coordinate increment denominator is
/// treated as degenerate and replaced by the analytic partial derivative at
/// the mixed midpoint. Keeps ī continuous as x' → x.
const INCREMENT_FLOOR: f64 = 1e-14;

/// Evaluate ī(x, x') for the given kind.
pub fn discrete_gradient(
    kind: &DiscreteGradientKind,
    integral: &FirstIntegral,
    x: &[f64],
    xp: &[f64],
) -> Result<Vec<f64>> {
    if x.len() != xp.len() {
        return Err(Error::InvalidParameter(
            "discrete gradient: dimension mismatch".into(),
        ));
    }
    match kind {
        DiscreteGradientKind::MidpointQuadratic => {
            if integral.quadratic_form().is_none() {
                return Err(Error::UnsupportedIntegral);
            }
            let mid: Vec<f64> = x.iter().zip(xp).map(|(a, b)| 0.5 * (a + b)).collect();
            Ok(integral.gradient(&mid))
        }
        DiscreteGradientKind::MeanValue { nodes } => {
            if *nodes == 0 {
                return Err(Error::InvalidParameter(
                    "mean value gradient needs at least one quadrature node".into(),
                ));
            }
            let (s, w) = gauss_legendre_01(*nodes);
            let mut out = vec![0.0; x.len()];
            for (sk, wk) in s.iter().zip(&w) {
                let point: Vec<f64> = x.iter().zip(xp).map(|(a, b)| a + sk * (b - a)).collect();
                let g = integral.gradient(&point);
                for (o, gi) in out.iter_mut().zip(&g) {
                    *o += wk * gi;
                }
            }
            Ok(out)
        }
        DiscreteGradientKind::CoordinateIncrement => {
            let d = x.len();
            // staircase corner values I(x'_1..x'_j, x_{j+1}..x_d), j = 0..=d
            let mut corners = Vec::with_capacity(d + 1);
            let mut point = x.to_vec();
            corners.push(integral.value(&point));
            for j in 0..d {
                point[j] = xp[j];
                corners.push(integral.value(&point));
            }
            let mut out = vec![0.0; d];
            for j in 0..d {
                let denom = xp[j] - x[j];
                if denom.abs() <= INCREMENT_FLOOR * (1.0 + x[j].abs()) {
                    // continuous limit of the quotient: partial derivative at
                    // the mixed point (x'_1..x'_{j-1}, (x_j+x'_j)/2, x_{j+1}..)
                    let mut mixed = xp[..j].to_vec();
                    mixed.push(0.5 * (x[j] + xp[j]));
                    mixed.extend_from_slice(&x[j + 1..]);
                    out[j] = integral.gradient(&mixed)[j];
                } else {
                    out[j] = (corners[j + 1] - corners[j]) / denom;
                }
            }
            Ok(out)
        }
    }
}

/// Residual of the defining identity, |ī·(x'-x) - (I(x') - I(x))|.
pub fn verify_dg_identity(
    kind: &DiscreteGradientKind,
    integral: &FirstIntegral,
    x: &[f64],
    xp: &[f64],
) -> Result<f64> {
    let dg = discrete_gradient(kind, integral, x, xp)?;
    let increment: f64 = dg
        .iter()
        .zip(xp.iter().zip(x))
        .map(|(g, (b, a))| g * (b - a))
        .sum();
    Ok((increment - (integral.value(xp) - integral.value(x))).abs())
}

/// Consistency residual |ī(x,x) - i(x)|, scaled check helper for tests.
pub fn consistency_residual(
    kind: &DiscreteGradientKind,
    integral: &FirstIntegral,
    x: &[f64],
) -> Result<f64> {
    let dg = discrete_gradient(kind, integral, x, x)?;
    let g = integral.gradient(x);
    Ok(norm(&crate::linalg::sub(&dg, &g)))
}

/// Gauss-Legendre nodes and weights on [0, 1]. Nodes are found by Newton
/// iteration on the Legendre polynomial recurrence; for the node counts used
/// here (single digits) this converges in a handful of steps.
fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // initial guess on [-1, 1]
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            pp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        nodes[i] = 0.5 * (1.0 - z);
        nodes[n - 1 - i] = 0.5 * (1.0 + z);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}
