//! Cyclic Jacobi eigensolver for the small symmetric matrices that come out
//! of a window's descriptor Jacobian (at most `(N + 5) x (N + 5)`).

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;
// At 1e-12 the eigenvectors of small eigenvalues keep relative errors near
// 1e-12·‖A‖ / λ, which shows up in the preservation term at the 1e-9 level.
// Convergence is quadratic, so the tighter bound costs one or two sweeps.
const OFF_DIAGONAL_TOL: f64 = 1e-15;
/// Eigenvalues in `(-NEGATIVE_CLAMP, 0)` are round-off and are set to zero.
pub const NEGATIVE_CLAMP: f64 = 1e-10;
const SIGN_EPS: f64 = 1e-12;

/// Square matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {n}x{n} matrix",
                data.len()
            )));
        }
        Ok(SquareMatrix { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::ShapeMismatch("matrix is not square".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(SquareMatrix { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Eigenpairs of a symmetric matrix.
///
/// Eigenvalues are sorted in descending order. Column `k` of `eigenvectors`
/// is the unit eigenvector for `eigenvalues[k]`, signed so that its first
/// non-negligible component is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: SquareMatrix,
}

impl EigenDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Column `k` as an owned vector.
    pub fn vector(&self, k: usize) -> Vec<f64> {
        (0..self.n()).map(|i| self.eigenvectors.get(i, k)).collect()
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// The input is symmetrized as `(A + Aᵀ) / 2` first. Iteration stops once
/// the off-diagonal Frobenius norm drops to `1e-15·‖A‖_F` or after 100
/// sweeps.
pub fn eigendecompose(matrix: &SquareMatrix) -> Result<EigenDecomposition> {
    let n = matrix.n;
    if matrix.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigendecomposition input".into()));
    }
    let scale = matrix.data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut a = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (matrix.get(i, j), matrix.get(j, i));
            if (x - y).abs() > 1e-9 * scale {
                return Err(Error::InvalidParameter(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
            a.set(i, j, 0.5 * (x + y));
        }
    }

    let mut v = SquareMatrix::identity(n);
    let norm = a.frobenius_norm();
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= OFF_DIAGONAL_TOL * norm {
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps the solver's order among exact ties.
    order.sort_by(|&i, &j| a.get(j, j).total_cmp(&a.get(i, i)));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut vectors = SquareMatrix::zeros(n);
    for (k, &src) in order.iter().enumerate() {
        let mut lambda = a.get(src, src);
        if lambda < 0.0 && lambda > -NEGATIVE_CLAMP {
            lambda = 0.0;
        }
        eigenvalues.push(lambda);
        let flip = (0..n)
            .map(|i| v.get(i, src))
            .find(|c| c.abs() > SIGN_EPS)
            .is_some_and(|c| c < 0.0);
        let sign = if flip { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors.set(i, k, sign * v.get(i, src));
        }
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors: vectors,
    })
}

fn off_diagonal_norm(a: &SquareMatrix) -> f64 {
    let n = a.n;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a.get(i, j) * a.get(i, j);
            }
        }
    }
    s.sqrt()
}

/// Applies the rotation in the (p, q) plane that annihilates `a[p][q]`,
/// updating only the affected rows and columns of the symmetric matrix.
fn rotate(a: &mut SquareMatrix, v: &mut SquareMatrix, p: usize, q: usize) {
    let n = a.n;
    let d = &mut a.data;
    let apq = d[p * n + q];
    if apq == 0.0 {
        return;
    }
    let (app, aqq) = (d[p * n + p], d[q * n + q]);
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let (akp, akq) = (d[k * n + p], d[k * n + q]);
        let (np, nq) = (c * akp - s * akq, s * akp + c * akq);
        d[k * n + p] = np;
        d[p * n + k] = np;
        d[k * n + q] = nq;
        d[q * n + k] = nq;
    }
    d[p * n + p] = app - t * apq;
    d[q * n + q] = aqq + t * apq;
    d[p * n + q] = 0.0;
    d[q * n + p] = 0.0;
    let w = &mut v.data;
    for k in 0..n {
        let (vkp, vkq) = (w[k * n + p], w[k * n + q]);
        w[k * n + p] = c * vkp - s * vkq;
        w[k * n + q] = s * vkp + c * vkq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_unit_eigenvalues() {
        let e = eigendecompose(&SquareMatrix::identity(3)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0, 1.0]);
        assert_eq!(e.eigenvectors, SquareMatrix::identity(3));
    }

    #[test]
    fn two_by_two_by_hand() {
        // det([[2-l, 1], [1, 2-l]]) = (l-3)(l-1)
        let m = SquareMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = eigendecompose(&m).unwrap();
        assert!((e.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = e.vector(0);
        let v1 = e.vector(1);
        assert!((v0[0] - h).abs() < 1e-14 && (v0[1] - h).abs() < 1e-14);
        assert!((v1[0] - h).abs() < 1e-14 && (v1[1] + h).abs() < 1e-14);
    }

    #[test]
    fn zero_matrix_and_empty() {
        let e = eigendecompose(&SquareMatrix::zeros(4)).unwrap();
        assert!(e.eigenvalues.iter().all(|&l| l == 0.0));
        let e = eigendecompose(&SquareMatrix::zeros(0)).unwrap();
        assert!(e.eigenvalues.is_empty());
    }

    #[test]
    fn tiny_negative_eigenvalue_is_clamped() {
        let m = SquareMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1e-12]]).unwrap();
        let e = eigendecompose(&m).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 0.0]);
        let m = SquareMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1e-3]]).unwrap();
        assert_eq!(eigendecompose(&m).unwrap().eigenvalues[1], -1e-3);
    }

    #[test]
    fn rejects_non_finite_and_asymmetric() {
        let m = SquareMatrix::from_rows(&[vec![1.0, f64::NAN], vec![f64::NAN, 1.0]]).unwrap();
        assert!(eigendecompose(&m).is_err());
        let m = SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(eigendecompose(&m).is_err());
    }

    #[test]
    fn diagonal_is_sorted_descending() {
        let m = SquareMatrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 5.0, 0.0], vec![0.0, 0.0, 3.0]]).unwrap();
        let e = eigendecompose(&m).unwrap();
        assert_eq!(e.eigenvalues, vec![5.0, 3.0, 1.0]);
        assert_eq!(e.vector(0), vec![0.0, 1.0, 0.0]);
        assert_eq!(e.vector(2), vec![1.0, 0.0, 0.0]);
    }
}
