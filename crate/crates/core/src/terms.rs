//! Redundancy and information-preservation terms and the objective that
//! combines them.
//!
//! Both terms average over the `N - 1` consecutive pairs of a keyframe set.
//! The reference pseudocode normalizes by `|K|` instead; the pair count is
//! used here because it matches the term definitions and keeps the
//! redundancy term inside `(0, 1]`.

use std::borrow::Borrow;

use crate::eigen::{eigendecompose, EigenDecomposition, SquareMatrix};
use crate::error::{Error, Result};
use crate::model::{cumulative_arclength, Descriptor, Keyframe, Pose};

/// `N x M` matrix, row `i` being the descriptor of keyframe `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DescriptorMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if cols == 0 {
            return Err(Error::InvalidParameter("descriptor dimension must be >= 1".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} descriptor matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("descriptor matrix".into()));
        }
        Ok(DescriptorMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn from_descriptors<'a>(descs: impl IntoIterator<Item = &'a Descriptor>) -> Result<Self> {
        let mut data = Vec::new();
        let mut cols = None;
        let mut rows = 0;
        for d in descs {
            let c = *cols.get_or_insert(d.dim());
            if d.dim() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    found: d.dim(),
                });
            }
            data.extend_from_slice(d.values());
            rows += 1;
        }
        Self::new(rows, cols.unwrap_or(0), data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        DescriptorMatrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }
}

/// Descriptor derivatives with respect to traveled distance: `M` rows
/// (descriptor components), `N` columns (keyframes).
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMatrix {
    m: usize,
    n: usize,
    // column-major: node `j` occupies columns[j*m..(j+1)*m]
    columns: Vec<f64>,
}

impl JacobianMatrix {
    /// Number of descriptor components (rows).
    pub fn rows(&self) -> usize {
        self.m
    }

    /// Number of keyframes (columns).
    pub fn cols(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, component: usize, node: usize) -> f64 {
        self.columns[node * self.m + component]
    }

    /// Derivative of the whole descriptor at one node.
    #[inline]
    pub fn column(&self, node: usize) -> &[f64] {
        &self.columns[node * self.m..(node + 1) * self.m]
    }

    /// `JᵀJ`, the `N x N` matrix of inner products between node derivatives.
    pub fn gram(&self) -> SquareMatrix {
        let n = self.n;
        let mut g = SquareMatrix::zeros(n);
        for a in 0..n {
            let ca = self.column(a);
            for b in a..n {
                let v = dot(ca, self.column(b));
                g.set(a, b, v);
                g.set(b, a, v);
            }
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for ObjectiveParams {
    fn default() -> Self {
        ObjectiveParams { alpha: 1.0, beta: 1.0 }
    }
}

impl ObjectiveParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = ObjectiveParams { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be > 0, got {}", self.beta)));
        }
        Ok(())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean distance of two equal-length slices. Lengths are not checked.
#[inline]
pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn descriptor_distance(a: &Descriptor, b: &Descriptor) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(l2_distance(a.values(), b.values()))
}

/// `1 / (1 + ‖a - b‖)`, in `(0, 1]`.
pub fn descriptor_similarity(a: &Descriptor, b: &Descriptor) -> Result<f64> {
    Ok(1.0 / (1.0 + descriptor_distance(a, b)?))
}

fn check_dims<K: Borrow<Keyframe>>(set: &[K]) -> Result<()> {
    let dim = set[0].borrow().descriptor.dim();
    for k in set {
        let d = k.borrow().descriptor.dim();
        if d != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: d,
            });
        }
    }
    Ok(())
}

/// Mean similarity of consecutive descriptors.
pub fn redundancy<K: Borrow<Keyframe>>(set: &[K]) -> Result<f64> {
    if set.len() < 2 {
        return Err(Error::RedundancyTooFew);
    }
    check_dims(set)?;
    let sum: f64 = set
        .windows(2)
        .map(|w| 1.0 / (1.0 + l2_distance(w[0].borrow().descriptor.values(), w[1].borrow().descriptor.values())))
        .sum();
    Ok(sum / (set.len() - 1) as f64)
}

/// Derivative of each descriptor component with respect to arc length.
///
/// Interior nodes use the three-point second-order stencil for non-uniform
/// spacing; the two end nodes use one-sided first-order differences.
pub fn numerical_jacobian(descriptors: &DescriptorMatrix, arclength: &[f64]) -> Result<JacobianMatrix> {
    let n = descriptors.rows();
    let m = descriptors.cols();
    if n < 2 {
        return Err(Error::TooFewKeyframes {
            what: "numerical jacobian",
            min: 2,
            got: n,
        });
    }
    if arclength.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} arc-length samples for {n} descriptors",
            arclength.len()
        )));
    }
    if arclength.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("arc length must be strictly increasing".into()));
    }

    let mut columns = vec![0.0; m * n];
    let one_sided = |out: &mut [f64], lo: usize, hi: usize| {
        let h = arclength[hi] - arclength[lo];
        for (o, (a, b)) in out.iter_mut().zip(descriptors.row(lo).iter().zip(descriptors.row(hi))) {
            *o = (b - a) / h;
        }
    };
    one_sided(&mut columns[..m], 0, 1);
    one_sided(&mut columns[(n - 1) * m..], n - 2, n - 1);
    for i in 1..n - 1 {
        let hd = arclength[i] - arclength[i - 1];
        let hs = arclength[i + 1] - arclength[i];
        let denom = hs * hd * (hd + hs);
        let (cp, cc, cn) = (-hs * hs / denom, (hs * hs - hd * hd) / denom, hd * hd / denom);
        let (prev, cur, next) = (descriptors.row(i - 1), descriptors.row(i), descriptors.row(i + 1));
        let out = &mut columns[i * m..(i + 1) * m];
        for c in 0..m {
            out[c] = cp * prev[c] + cc * cur[c] + cn * next[c];
        }
    }
    Ok(JacobianMatrix { m, n, columns })
}

/// Eigenvalues at or below this fraction of the largest are round-off: the
/// Gram matrix of an `N`-node Jacobian has rank at most `N - 1`.
pub const RANK_TOL: f64 = 1e-12;

/// `D' = √Λ · V · D`. Negative eigenvalues and those within `RANK_TOL` of
/// zero (relative to the largest) are treated as zero.
pub fn transform_descriptors(descriptors: &DescriptorMatrix, eig: &EigenDecomposition) -> Result<DescriptorMatrix> {
    let n = descriptors.rows();
    if eig.n() != n {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} eigenbasis for {n} descriptors",
            eig.n(),
            eig.n()
        )));
    }
    let m = descriptors.cols();
    let floor = RANK_TOL * eig.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l));
    let mut data = vec![0.0; n * m];
    for k in 0..n {
        let lambda = eig.eigenvalues[k];
        let scale = if lambda > floor { lambda.sqrt() } else { 0.0 };
        let out = &mut data[k * m..(k + 1) * m];
        if scale == 0.0 {
            continue;
        }
        for j in 0..n {
            let w = scale * eig.eigenvectors.get(k, j);
            if w == 0.0 {
                continue;
            }
            for (o, d) in out.iter_mut().zip(descriptors.row(j)) {
                *o += w * d;
            }
        }
    }
    DescriptorMatrix::new(n, m, data)
}

/// Information preservation of an ordered set given its poses and
/// descriptors. Always `<= 0`.
pub fn preservation_of(poses: &[Pose], descriptors: &DescriptorMatrix) -> Result<f64> {
    let n = descriptors.rows();
    if n < 2 {
        return Err(Error::TooFewKeyframes {
            what: "preservation",
            min: 2,
            got: n,
        });
    }
    if poses.len() != n {
        return Err(Error::CountMismatch {
            expected: n,
            found: poses.len(),
        });
    }
    let s = cumulative_arclength(poses)?;
    let jac = numerical_jacobian(descriptors, &s)?;
    let eig = eigendecompose(&jac.gram())?;
    let transformed = transform_descriptors(descriptors, &eig)?;
    let sum: f64 = (0..n - 1)
        .map(|i| l2_distance(transformed.row(i), transformed.row(i + 1)))
        .sum();
    Ok(-sum / (n - 1) as f64)
}

/// Negative mean distance between consecutive descriptors after projecting
/// them onto the principal directions of the descriptor-vs-arclength
/// Jacobian. Values near zero mean the set keeps the descriptor structure.
pub fn preservation<K: Borrow<Keyframe>>(set: &[K]) -> Result<f64> {
    if set.len() < 2 {
        return Err(Error::TooFewKeyframes {
            what: "preservation",
            min: 2,
            got: set.len(),
        });
    }
    check_dims(set)?;
    let poses: Vec<Pose> = set.iter().map(|k| k.borrow().pose).collect();
    let desc = DescriptorMatrix::from_descriptors(set.iter().map(|k| &k.borrow().descriptor))?;
    preservation_of(&poses, &desc)
}

/// Combines the two terms as `(ρ + α) / (π − β)`. Lower is better; the
/// value is always negative.
#[inline]
pub fn combine(redundancy: f64, preservation: f64, params: &ObjectiveParams) -> f64 {
    (redundancy + params.alpha) / (preservation - params.beta)
}

pub fn objective<K: Borrow<Keyframe>>(set: &[K], params: &ObjectiveParams) -> Result<f64> {
    params.validate()?;
    Ok(combine(redundancy(set)?, preservation(set)?, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kf(id: u64, x: f64, d: Vec<f64>) -> Keyframe {
        Keyframe::new(id, Pose::from_position(x, 0.0, 0.0), Descriptor::new(d).unwrap())
    }

    fn desc(v: Vec<f64>) -> Descriptor {
        Descriptor::new(v).unwrap()
    }

    #[test]
    fn distance_and_similarity_examples() {
        let z = desc(vec![0.0, 0.0]);
        assert_eq!(descriptor_distance(&z, &z).unwrap(), 0.0);
        assert_eq!(descriptor_distance(&desc(vec![1.0, 0.0]), &z).unwrap(), 1.0);
        assert_eq!(descriptor_distance(&desc(vec![3.0, 4.0]), &z).unwrap(), 5.0);
        assert_eq!(descriptor_similarity(&z, &z).unwrap(), 1.0);
        assert_eq!(descriptor_similarity(&desc(vec![1.0, 0.0]), &z).unwrap(), 0.5);
        assert_eq!(descriptor_similarity(&desc(vec![3.0, 0.0]), &z).unwrap(), 0.25);
        assert!(descriptor_distance(&desc(vec![1.0]), &z).is_err());
    }

    #[test]
    fn redundancy_examples() {
        let same = vec![
            kf(0, 0.0, vec![1.0, 2.0]),
            kf(1, 1.0, vec![1.0, 2.0]),
            kf(2, 2.0, vec![1.0, 2.0]),
        ];
        assert_eq!(redundancy(&same).unwrap(), 1.0);
        let pair = vec![kf(0, 0.0, vec![0.0]), kf(1, 1.0, vec![1.0])];
        assert_eq!(redundancy(&pair).unwrap(), 0.5);
        assert!(matches!(redundancy(&pair[..1]), Err(Error::RedundancyTooFew)));
        assert_eq!(
            Error::RedundancyTooFew.to_string(),
            "redundancy undefined for fewer than two keyframes"
        );
    }

    #[test]
    fn mixed_dimensions_are_rejected() {
        let set = vec![kf(0, 0.0, vec![0.0]), kf(1, 1.0, vec![1.0, 2.0])];
        assert!(redundancy(&set).is_err());
        assert!(preservation(&set).is_err());
    }

    #[test]
    fn jacobian_of_constant_descriptors_is_zero() {
        let d = DescriptorMatrix::from_rows(&vec![vec![3.0, -1.0]; 4]).unwrap();
        let j = numerical_jacobian(&d, &[0.0, 0.5, 2.0, 2.1]).unwrap();
        assert!(j.columns.iter().all(|v| v.abs() < 1e-12));
        assert_eq!((j.rows(), j.cols()), (2, 4));
    }

    #[test]
    fn jacobian_is_exact_for_affine_components() {
        let x = [0.0, 1.0, 3.0, 4.0];
        let d = DescriptorMatrix::from_rows(&x.iter().map(|&s| vec![2.0 * s]).collect::<Vec<_>>()).unwrap();
        let j = numerical_jacobian(&d, &x).unwrap();
        for n in 0..4 {
            assert!((j.get(0, n) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_is_exact_for_quadratics_at_interior_nodes() {
        let x = [0.0, 0.3, 1.0, 1.2, 2.5];
        let d = DescriptorMatrix::from_rows(&x.iter().map(|&s| vec![s * s]).collect::<Vec<_>>()).unwrap();
        let j = numerical_jacobian(&d, &x).unwrap();
        for (n, &xn) in x.iter().enumerate().take(4).skip(1) {
            assert!((j.get(0, n) - 2.0 * xn).abs() < 1e-12, "node {n}");
        }
    }

    #[test]
    fn jacobian_preconditions() {
        let d = DescriptorMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(numerical_jacobian(&d, &[0.0]).is_err());
        let d = DescriptorMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(numerical_jacobian(&d, &[0.0, 0.0]).is_err());
        assert!(numerical_jacobian(&d, &[0.0]).is_err());
    }

    #[test]
    fn transform_with_zero_eigenvalues_is_zero() {
        let d = DescriptorMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let eig = EigenDecomposition {
            eigenvalues: vec![0.0, 0.0],
            eigenvectors: SquareMatrix::identity(2),
        };
        let t = transform_descriptors(&d, &eig).unwrap();
        assert!(t.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn transform_with_identity_basis_is_identity() {
        let d = DescriptorMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let eig = EigenDecomposition {
            eigenvalues: vec![1.0, 1.0],
            eigenvectors: SquareMatrix::identity(2),
        };
        assert_eq!(transform_descriptors(&d, &eig).unwrap(), d);
        let bad = EigenDecomposition {
            eigenvalues: vec![1.0],
            eigenvectors: SquareMatrix::identity(1),
        };
        assert!(transform_descriptors(&d, &bad).is_err());
    }

    #[test]
    fn preservation_of_constant_descriptors_is_zero() {
        let set: Vec<_> = (0..5).map(|i| kf(i, i as f64, vec![0.5, 0.5, 0.5])).collect();
        assert_eq!(preservation(&set).unwrap(), 0.0);
        assert!(preservation(&set[..1]).is_err());
    }

    #[test]
    fn objective_arithmetic() {
        let p = ObjectiveParams::default();
        assert_eq!(combine(0.5, -0.5, &p), -1.0);
        assert_eq!(combine(1.0, 0.0, &p), -2.0);
        assert!(ObjectiveParams::new(0.0, 1.0).is_err());
        assert!(ObjectiveParams::new(1.0, -1.0).is_err());
        let set: Vec<_> = (0..3).map(|i| kf(i, i as f64, vec![1.0])).collect();
        assert_eq!(objective(&set, &p).unwrap(), -2.0);
    }

    #[test]
    fn select_rows_keeps_order() {
        let d = DescriptorMatrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        assert_eq!(d.select_rows(&[2, 0]).as_slice(), &[3.0, 1.0]);
    }
}
