//! The three discrete gradient constructions and their defining identity
//!
//! ```text
//! ī(x,x') · (x' - x) = I(x') - I(x)
//! ```
//!
//! evaluated on small closed-form cases: the midpoint gradient on a
//! quadratic, the Itoh-Abe staircase on a product, and the mean-value
//! (averaged vector field) gradient where the quadrature is and is not
//! exact.
//!
//! ```bash
//! cargo run --example discrete_gradients
//! ```

use dgode::problems::FirstIntegral;
use dgode::{discrete_gradient, verify_dg_identity, DiscreteGradientKind};

fn show(
    label: &str,
    kind: &DiscreteGradientKind,
    integral: &FirstIntegral,
    x: &[f64],
    xp: &[f64],
) -> dgode::Result<()> {
    let dg = discrete_gradient(kind, integral, x, xp)?;
    let residual = verify_dg_identity(kind, integral, x, xp)?;
    println!("{label}");
    println!("  x = {x:?}, x' = {xp:?}");
    println!("  ī(x,x') = {dg:?}");
    println!("  identity residual = {residual:.3e}\n");
    Ok(())
}

fn main() -> dgode::Result<()> {
    let half_norm2 = dgode::harmonic_oscillator();
    show(
        "midpoint gradient, I = ½|x|²  (exact by symmetry)",
        &DiscreteGradientKind::MidpointQuadratic,
        half_norm2.integral(),
        &[1.0, 0.0],
        &[0.0, 1.0],
    )?;

    let product = FirstIntegral::new(|x: &[f64]| x[0] * x[1], |x: &[f64]| vec![x[1], x[0]]);
    show(
        "coordinate increment (Itoh-Abe), I = x1·x2  (telescoping, exact)",
        &DiscreteGradientKind::CoordinateIncrement,
        &product,
        &[1.0, 1.0],
        &[2.0, 3.0],
    )?;

    let cubic = FirstIntegral::new(
        |x: &[f64]| x[0].powi(3),
        |x: &[f64]| vec![3.0 * x[0] * x[0]],
    );
    show(
        "mean value with 2 Gauss nodes, I = x³  (quadrature exact: ī = 7)",
        &DiscreteGradientKind::MeanValue { nodes: 2 },
        &cubic,
        &[1.0],
        &[2.0],
    )?;

    let quartic = FirstIntegral::new(
        |x: &[f64]| x[0].powi(4),
        |x: &[f64]| vec![4.0 * x[0].powi(3)],
    );
    show(
        "mean value with 1 node, I = x⁴  (midpoint rule, visibly inexact)",
        &DiscreteGradientKind::MeanValue { nodes: 1 },
        &quartic,
        &[0.0],
        &[1.0],
    )?;
    Ok(())
}
