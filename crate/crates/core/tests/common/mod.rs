#![allow(dead_code)]

use nalgebra::DMatrix;

use curvhom::frame_geometry::CurvatureTensor;
use curvhom::models::{build_almost_abelian, AlmostAbelianModel, AlmostAbelianSpec, ChartModel};
use curvhom::oracle::{curvature_with, Stencil, DEFAULT_STEP};
use curvhom::rng::SampleRng;

pub fn cyclic_spec(a: f64) -> AlmostAbelianSpec {
    let s = 0.5f64.sqrt();
    AlmostAbelianSpec::new(vec![1, 2], a, 1.0, 1.0, vec![s, 0.0, s, 0.0])
}

pub fn ktv(a: f64) -> AlmostAbelianModel {
    build_almost_abelian(&cyclic_spec(a)).unwrap()
}

pub fn points<M: ChartModel>(model: &M, seed: u64, count: usize) -> Vec<Vec<f64>> {
    let mut rng = SampleRng::new(seed);
    (0..count).map(|_| model.sample_point(&mut rng)).collect()
}

pub fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

/// `(0, Z)` and an orthonormal basis of `Z^⊥ ∩ V`, frame components.
pub fn z_and_perp(spec: &AlmostAbelianSpec) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = spec.m + 1;
    let norm = spec.z.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut z = vec![0.0];
    z.extend(spec.z.iter().map(|x| x / norm));
    let mut basis: Vec<Vec<f64>> = vec![z.clone()];
    for i in 1..n {
        let mut v = unit(n, i);
        for b in &basis {
            let c: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv > 1e-8 {
            basis.push(v.into_iter().map(|x| x / nv).collect());
        }
    }
    basis.remove(0);
    (z, basis)
}

/// Constant curvature `k` on the plane spanned by orthonormal `e, z`, flat
/// elsewhere: `R_ijkl = k (P_il P_jk − P_ik P_jl)`.
pub fn plane_curvature(n: usize, k: f64, e: &[f64], z: &[f64]) -> CurvatureTensor {
    let p = DMatrix::from_fn(n, n, |i, j| e[i] * e[j] + z[i] * z[j]);
    CurvatureTensor::from_fn(n, |i, j, a, l| k * (p[(i, l)] * p[(j, a)] - p[(i, a)] * p[(j, l)]))
}

/// Finite-difference curvature in the model frame.
pub fn path_c<M: ChartModel>(model: &M, p: &[f64]) -> CurvatureTensor {
    let frame = model.frame_matrix(p).unwrap();
    curvature_with(model, p, Stencil::richardson(DEFAULT_STEP), &frame).unwrap()
}

pub fn plain_fd_error<M: ChartModel>(model: &M, p: &[f64], h: f64, exact: &CurvatureTensor) -> f64 {
    let frame = model.frame_matrix(p).unwrap();
    curvature_with(model, p, Stencil::plain(h), &frame).unwrap().max_abs_diff(exact)
}

/// Haar-ish random orthogonal matrix from QR of a Gaussian matrix.
pub fn random_orthogonal(rng: &mut SampleRng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.normal());
    g.qr().q()
}
