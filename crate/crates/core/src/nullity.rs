//! κ-nullity spaces of an algebraic curvature tensor.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::frame_geometry::CurvatureTensor;
use crate::par::{self, Execution};

pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullityResult {
    pub kappa: f64,
    /// Orthonormal kernel basis in frame components.
    pub basis: Vec<Vec<f64>>,
    pub index: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub threshold: f64,
}

/// Rows `(i<j, l)` of the linear map `z ↦ R(e_i,e_j)z + κ(⟨e_i,z⟩e_j − ⟨e_j,z⟩e_i)`.
pub fn nullity_matrix(r: &CurvatureTensor, kappa: f64) -> DMatrix<f64> {
    let n = r.dim();
    let ps: Vec<(usize, usize)> = crate::frame_geometry::pairs(n);
    let mut a = DMatrix::zeros(ps.len() * n, n);
    for (p, &(i, j)) in ps.iter().enumerate() {
        for l in 0..n {
            let row = p * n + l;
            for c in 0..n {
                let mut v = r.get(i, j, c, l);
                if i == c && j == l {
                    v += kappa;
                }
                if j == c && i == l {
                    v -= kappa;
                }
                a[(row, c)] = v;
            }
        }
    }
    a
}

pub fn nullity_space(r: &CurvatureTensor, kappa: f64, tol: f64) -> NullityResult {
    let n = r.dim();
    if n < 2 {
        return NullityResult {
            kappa,
            basis: (0..n).map(|i| unit(n, i)).collect(),
            index: n,
            singular_values: vec![0.0; n],
            threshold: tol,
        };
    }
    let a = nullity_matrix(r, kappa);
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let singular_values: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let smax = singular_values[0];
    let threshold = if smax > 0.0 { tol * smax } else { tol };
    let basis: Vec<Vec<f64>> = order
        .iter()
        .filter(|&&k| svd.singular_values[k] <= threshold)
        .map(|&k| v_t.row(k).iter().copied().collect())
        .collect();
    NullityResult {
        kappa,
        index: basis.len(),
        basis,
        singular_values,
        threshold,
    }
}

pub fn kappa_scan(r: &CurvatureTensor, grid: &[f64], tol: f64, exec: Execution) -> Vec<NullityResult> {
    par::map(exec, grid, |&k| nullity_space(r, k, tol))
}

/// κ values of a scan with positive index.
pub fn positive_kappas(scan: &[NullityResult]) -> Vec<f64> {
    scan.iter().filter(|r| r.index > 0).map(|r| r.kappa).collect()
}

/// Max-abs residual of `z` in the κ-nullity equation.
pub fn nullity_defect(r: &CurvatureTensor, z: &[f64], kappa: f64) -> f64 {
    let a = nullity_matrix(r, kappa);
    (a * DVector::from_column_slice(z)).amax()
}

/// Orthogonal projector onto the span of orthonormal `basis`.
pub fn projector(n: usize, basis: &[Vec<f64>]) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(n, n);
    for b in basis {
        let v = DVector::from_column_slice(b);
        p += &v * v.transpose();
    }
    p
}

/// Spectral-norm distance between the projectors onto two subspaces; the
/// sine of the largest principal angle when dimensions agree.
pub fn subspace_distance(n: usize, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let d = projector(n, a) - projector(n, b);
    d.singular_values().max()
}

/// Orthonormalize a spanning list by modified Gram–Schmidt, dropping
/// dependent vectors.
pub fn orthonormalize(vectors: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        let mut w = DVector::from_column_slice(v);
        let scale = w.norm();
        for q in &out {
            let c = q.dot(&w);
            w.axpy(-c, q, 1.0);
        }
        let nrm = w.norm();
        if nrm > tol * scale.max(1.0) {
            out.push(w / nrm);
        }
    }
    out.into_iter().map(|v| v.iter().copied().collect()).collect()
}

/// Angle between a one-dimensional kernel and a direction.
pub fn angle_to(basis: &[Vec<f64>], v: &[f64]) -> Option<f64> {
    if basis.len() != 1 {
        return None;
    }
    let b = DVector::from_column_slice(&basis[0]).normalize();
    let v = DVector::from_column_slice(v).normalize();
    let c = b.dot(&v);
    let s = (&b - &v * c).norm();
    Some(s.atan2(c.abs()))
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_tensor_has_full_zero_nullity() {
        let r = CurvatureTensor::zero(4);
        let res = nullity_space(&r, 0.0, DEFAULT_TOL);
        assert_eq!(res.index, 4);
        let scan = kappa_scan(&r, &[0.0], DEFAULT_TOL, Execution::Sequential);
        assert_eq!(scan[0].index, 4);
        assert_eq!(nullity_space(&r, 1.0, DEFAULT_TOL).index, 0);
    }

    #[test]
    fn space_form_nullity_is_everything_at_its_curvature() {
        let r = CurvatureTensor::constant_curvature(3, -1.0);
        let scan = kappa_scan(&r, &[-2.0, -1.0, 0.0, 1.0], DEFAULT_TOL, Execution::Sequential);
        assert_eq!(positive_kappas(&scan), vec![-1.0]);
        assert_eq!(scan[1].index, 3);
    }

    #[test]
    fn basis_is_orthonormal_and_solves_equation() {
        // ℝH²(−1) × ℝ: 0-nullity is the flat factor, (−1)-nullity is empty
        let r = CurvatureTensor::constant_curvature(2, -1.0).product_with_flat(2);
        let res = nullity_space(&r, 0.0, DEFAULT_TOL);
        assert_eq!(res.index, 2);
        for (i, b) in res.basis.iter().enumerate() {
            assert!(nullity_defect(&r, b, 0.0) < 1e-12);
            for (j, c) in res.basis.iter().enumerate() {
                let d: f64 = b.iter().zip(c).map(|(x, y)| x * y).sum();
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        let flat = vec![vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]];
        assert!(subspace_distance(4, &res.basis, &flat) < 1e-12);
    }

    #[test]
    fn angle_of_kernel() {
        let b = vec![vec![0.0, 0.0, -1.0]];
        assert!(angle_to(&b, &[0.0, 0.0, 1.0]).unwrap() < 1e-15);
        let a = angle_to(&b, &[0.0, 1.0, 1.0]).unwrap();
        assert!((a - std::f64::consts::FRAC_PI_4).abs() < 1e-14);
    }

    #[test]
    fn gram_schmidt_drops_dependent() {
        let q = orthonormalize(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![0.0, 1.0]], 1e-12);
        assert_eq!(q.len(), 2);
    }
}
