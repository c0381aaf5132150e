//! Small dense helpers over `CMat` used by every other module.

use nalgebra::DVector;

use crate::{CMat, LabError, Result, C64};

/// Singular values sorted in decreasing order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Operator (spectral) norm: the largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    match m.nrows() {
        0 => 0.0,
        1 if m.ncols() == 1 => m[(0, 0)].norm(),
        _ => singular_values(m).first().copied().unwrap_or(0.0),
    }
}

/// `σ_min / max(σ_max, 1)`: a reciprocal condition that also flags a
/// matrix that is small in absolute terms (a `1×1` zero has rcond 0 here).
pub fn reciprocal_condition(m: &CMat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) => lo / hi.max(1.0),
        _ => 0.0,
    }
}

pub fn det(m: &CMat) -> C64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    m.clone().lu().determinant()
}

pub fn inverse(m: &CMat) -> Result<CMat> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| LabError::Singular(format!("{}x{} matrix has no inverse", m.nrows(), m.ncols())))
}

/// Solves `a x = b` by LU.
pub fn solve(a: &CMat, b: &CMat) -> Result<CMat> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| LabError::Singular("linear system is singular".into()))
}

/// Maximum entrywise modulus (a cheap norm for residual reporting).
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.norm()))
}

pub fn identity(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

/// Kernel of `m` by singular-value threshold.
#[derive(Debug, Clone)]
pub struct Kernel {
    /// Orthonormal kernel vectors as columns (`L × k`).
    pub basis: CMat,
    pub singular_values: Vec<f64>,
    pub threshold: f64,
    /// Some singular value lies in `(threshold/10, 10·threshold)`.
    pub borderline: bool,
}

impl Kernel {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

/// Right singular vectors whose singular values are `<= threshold`.
pub fn kernel(m: &CMat, threshold: f64) -> Kernel {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();

    let cols: Vec<DVector<C64>> = order
        .iter()
        .filter(|&&i| svd.singular_values[i] <= threshold)
        .map(|&i| v_t.row(i).adjoint())
        .collect();
    let basis = if cols.is_empty() {
        CMat::zeros(n, 0)
    } else {
        CMat::from_columns(&cols)
    };
    let borderline = sv
        .iter()
        .any(|&s| s > threshold / 10.0 && s < threshold * 10.0 && threshold > 0.0);
    Kernel { basis, singular_values: sv, threshold, borderline }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_of_rank_one() {
        let m = CMat::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        let k = kernel(&m, 1e-8);
        assert_eq!(k.dim(), 1);
        let v = k.basis.column(0);
        assert!((v[0] + v[1]).norm() < 1e-12);
        assert!(((m * k.basis).norm()) < 1e-12);
    }

    #[test]
    fn op_norm_is_largest_singular_value() {
        let m = CMat::from_diagonal(&DVector::from_vec(vec![C64::new(-3.0, 0.0), C64::new(0.0, 2.0)]));
        assert!((op_norm(&m) - 3.0).abs() < 1e-14);
        assert!((reciprocal_condition(&m) - 2.0 / 3.0).abs() < 1e-14);
    }
}
