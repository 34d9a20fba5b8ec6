//! Small dense linear algebra for the linearly implicit step and its
//! diagnostics. Everything here targets the tiny systems (d ≤ 4 or so) that
//! the step maps produce; there is no attempt at large-scale performance.

use crate::error::{Error, Result};

/// Dot product. Panics on length mismatch (programmer error).
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot: dimension mismatch");
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Componentwise `a + scale * b`.
pub fn add_scaled(a: &[f64], scale: f64, b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "add_scaled: dimension mismatch");
    a.iter().zip(b).map(|(x, y)| x + scale * y).collect()
}

/// Componentwise `a - b`.
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "sub: dimension mismatch");
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Square dense matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(dim: usize) -> Self {
        DenseMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidParameter(
                "from_rows: matrix must be square".into(),
            ));
        }
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.dim + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.dim + c] = v;
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim, "matvec: dimension mismatch");
        (0..self.dim)
            .map(|r| (0..self.dim).map(|c| self.get(r, c) * v[c]).sum())
            .collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.dim, other.dim, "matmul: dimension mismatch");
        let mut out = Self::zeros(self.dim);
        for r in 0..self.dim {
            for c in 0..self.dim {
                let mut s = 0.0;
                for k in 0..self.dim {
                    s += self.get(r, k) * other.get(k, c);
                }
                out.set(r, c, s);
            }
        }
        out
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = Self::zeros(self.dim);
        for r in 0..self.dim {
            for c in 0..self.dim {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> DenseMatrix {
        DenseMatrix {
            dim: self.dim,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.dim, other.dim, "add: dimension mismatch");
        DenseMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Pivot magnitudes below this are treated as an exactly singular system.
const PIVOT_FLOOR: f64 = 1e-300;

/// Solve `A z = rhs` by LU factorization with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn lu_solve(a: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = a.dim();
    if rhs.len() != n {
        return Err(Error::InvalidParameter(
            "lu_solve: rhs dimension mismatch".into(),
        ));
    }
    let mut lu = a.clone();
    let mut x: Vec<f64> = rhs.to_vec();

    for col in 0..n {
        // partial pivoting
        let mut pivot_row = col;
        let mut pivot_mag = lu.get(col, col).abs();
        for r in col + 1..n {
            let mag = lu.get(r, col).abs();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = r;
            }
        }
        if pivot_mag < PIVOT_FLOOR {
            return Err(Error::SingularStep);
        }
        if pivot_row != col {
            for c in 0..n {
                let tmp = lu.get(col, c);
                lu.set(col, c, lu.get(pivot_row, c));
                lu.set(pivot_row, c, tmp);
            }
            x.swap(col, pivot_row);
        }
        let pivot = lu.get(col, col);
        for r in col + 1..n {
            let factor = lu.get(r, col) / pivot;
            lu.set(r, col, factor);
            for c in col + 1..n {
                lu.set(r, c, lu.get(r, c) - factor * lu.get(col, c));
            }
            x[r] -= factor * x[col];
        }
    }

    // back substitution
    for r in (0..n).rev() {
        let mut s = x[r];
        for c in r + 1..n {
            s -= lu.get(r, c) * x[c];
        }
        x[r] = s / lu.get(r, r);
    }
    Ok(x)
}

/// 2-norm condition number: ratio of largest to smallest singular value,
/// computed from the eigenvalues of the symmetric matrix AᵀA. The step
/// matrix `Id - (h/2) S̃ M` is nonsymmetric, so the singular-value ratio is
/// the well-posedness measure reported here; for symmetric positive definite
/// matrices it coincides with the eigenvalue ratio.
///
/// Returns `f64::INFINITY` when the smallest singular value underflows.
pub fn condition_number(a: &DenseMatrix) -> f64 {
    let gram = a.transpose().matmul(a);
    let eigs = symmetric_eigenvalues(&gram);
    let sigma_max = eigs.iter().fold(0.0_f64, |m, &l| m.max(l)).max(0.0).sqrt();
    let sigma_min = eigs
        .iter()
        .fold(f64::INFINITY, |m, &l| m.min(l))
        .max(0.0)
        .sqrt();
    if sigma_min < PIVOT_FLOOR {
        return f64::INFINITY;
    }
    sigma_max / sigma_min
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations. Adequate for
/// the small dimensions used here.
fn symmetric_eigenvalues(a: &DenseMatrix) -> Vec<f64> {
    let n = a.dim();
    let mut m = a.clone();
    if n == 1 {
        return vec![m.get(0, 0)];
    }
    let scale = m.max_abs().max(1e-300);
    for _sweep in 0..64 {
        let mut off = 0.0_f64;
        for r in 0..n {
            for c in r + 1..n {
                off = off.max(m.get(r, c).abs());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq.abs() <= 1e-18 * scale {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m.get(k, p);
                    let akq = m.get(k, q);
                    m.set(k, p, c * akp - s * akq);
                    m.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = m.get(p, k);
                    let aqk = m.get(q, k);
                    m.set(p, k, c * apk - s * aqk);
                    m.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    (0..n).map(|i| m.get(i, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Independent oracle: eigenvalues of a symmetric 3x3 matrix by the
    // trigonometric solution of the characteristic cubic.
    fn sym3_eigenvalues_cubic(b: &DenseMatrix) -> [f64; 3] {
        assert_eq!(b.dim(), 3);
        let p1 = b.get(0, 1).powi(2) + b.get(0, 2).powi(2) + b.get(1, 2).powi(2);
        let q = (b.get(0, 0) + b.get(1, 1) + b.get(2, 2)) / 3.0;
        if p1 == 0.0 {
            let mut d = [b.get(0, 0), b.get(1, 1), b.get(2, 2)];
            d.sort_by(|x, y| x.partial_cmp(y).unwrap());
            return d;
        }
        let p2 = (b.get(0, 0) - q).powi(2)
            + (b.get(1, 1) - q).powi(2)
            + (b.get(2, 2) - q).powi(2)
            + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let mut bq = DenseMatrix::zeros(3);
        for r in 0..3 {
            for c in 0..3 {
                let v = if r == c { b.get(r, c) - q } else { b.get(r, c) };
                bq.set(r, c, v / p);
            }
        }
        let det = bq.get(0, 0) * (bq.get(1, 1) * bq.get(2, 2) - bq.get(1, 2) * bq.get(2, 1))
            - bq.get(0, 1) * (bq.get(1, 0) * bq.get(2, 2) - bq.get(1, 2) * bq.get(2, 0))
            + bq.get(0, 2) * (bq.get(1, 0) * bq.get(2, 1) - bq.get(1, 1) * bq.get(2, 0));
        let r = (det / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let e2 = 3.0 * q - e1 - e3;
        let mut d = [e1, e2, e3];
        d.sort_by(|x, y| x.partial_cmp(y).unwrap());
        d
    }

    fn random_matrix(rng: &mut ChaCha8Rng, dim: usize) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(dim);
        for r in 0..dim {
            for c in 0..dim {
                m.set(r, c, rng.gen_range(-2.0..2.0));
            }
            // diagonal dominance keeps the samples well-conditioned
            m.set(r, r, m.get(r, r) + 4.0);
        }
        m
    }

    #[test]
    fn lu_identity() {
        let a = DenseMatrix::identity(3);
        let z = lu_solve(&a, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(z, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn lu_diagonal() {
        let a = DenseMatrix::diagonal(&[2.0, 4.0]);
        let z = lu_solve(&a, &[2.0, 8.0]).unwrap();
        assert_eq!(z, vec![1.0, 2.0]);
    }

    #[test]
    fn lu_residual_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let a = random_matrix(&mut rng, 3);
            let rhs: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let z = lu_solve(&a, &rhs).unwrap();
            let res = norm(&sub(&a.matvec(&z), &rhs));
            assert!(
                res <= 1e-12 * (1.0 + norm(&rhs)),
                "residual {res:e} too large"
            );
        }
    }

    #[test]
    fn lu_singular_detected() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(
            lu_solve(&a, &[1.0, 1.0]),
            Err(Error::SingularStep)
        ));
    }

    #[test]
    fn cond_identity_and_diag() {
        assert!((condition_number(&DenseMatrix::identity(3)) - 1.0).abs() < 1e-12);
        let d = DenseMatrix::diagonal(&[2.0, 1.0]);
        assert!((condition_number(&d) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cond_singular_is_infinite() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(condition_number(&a).is_infinite());
    }

    #[test]
    fn cond_against_cubic_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let a = random_matrix(&mut rng, 3);
            let gram = a.transpose().matmul(&a);
            let eigs = sym3_eigenvalues_cubic(&gram);
            let expected = (eigs[2].max(0.0) / eigs[0].max(1e-300)).sqrt();
            let got = condition_number(&a);
            assert!(
                (got - expected).abs() <= 1e-8 * expected,
                "cond {got} vs oracle {expected}"
            );
        }
    }

    #[test]
    fn cond_scale_invariance_and_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a = random_matrix(&mut rng, 3);
            let c = condition_number(&a);
            let cs = condition_number(&a.scaled(-3.7));
            assert!((c - cs).abs() <= 1e-12 * c);
            assert!(c >= 1.0);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn lu_solves_diag_dominant(seed in 0u64..500) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a = random_matrix(&mut rng, 4);
                let rhs: Vec<f64> =
                    (0..4).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
                let z = lu_solve(&a, &rhs).unwrap();
                let res = norm(&sub(&a.matvec(&z), &rhs));
                prop_assert!(res <= 1e-12 * (1.0 + norm(&rhs)));
            }
        }
    }
}
