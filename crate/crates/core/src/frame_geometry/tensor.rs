use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};

/// Components `R_{ijkl} = ⟨R(E_i,E_j)E_k, E_l⟩` in an orthonormal frame, with
/// `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_{[X,Y]}Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTensor {
    n: usize,
    components: Vec<f64>,
    point: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct SymmetryResiduals {
    pub antisym_first: f64,
    pub antisym_last: f64,
    pub pair: f64,
    pub bianchi: f64,
}

impl SymmetryResiduals {
    pub fn max(&self) -> f64 {
        self.antisym_first
            .max(self.antisym_last)
            .max(self.pair)
            .max(self.bianchi)
    }
}

impl CurvatureTensor {
    pub fn zero(n: usize) -> Self {
        CurvatureTensor {
            n,
            components: vec![0.0; n.pow(4)],
            point: Vec::new(),
        }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        let mut r = CurvatureTensor::zero(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = f(i, j, k, l);
                        r.set(i, j, k, l, v);
                    }
                }
            }
        }
        r
    }

    pub fn from_components(n: usize, components: Vec<f64>) -> Result<Self> {
        if components.len() != n.pow(4) {
            return Err(Error::Shape(format!(
                "curvature tensor needs {} components, got {}",
                n.pow(4),
                components.len()
            )));
        }
        Ok(CurvatureTensor {
            n,
            components,
            point: Vec::new(),
        })
    }

    pub fn with_point(mut self, point: &[f64]) -> Self {
        self.point = point.to_vec();
        self
    }

    /// Constant sectional curvature `kappa`: `R(X,Y)Z = κ(⟨Y,Z⟩X − ⟨X,Z⟩Y)`.
    pub fn constant_curvature(n: usize, kappa: f64) -> Self {
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        CurvatureTensor::from_fn(n, |i, j, k, l| kappa * (d(j, k) * d(i, l) - d(i, k) * d(j, l)))
    }

    /// `R = Σ_s h_s ⊙ h_s / 2` (Kulkarni–Nomizu square of symmetric forms), an
    /// algebraic curvature tensor for any symmetric `h_s`.
    pub fn kulkarni_nomizu(forms: &[DMatrix<f64>]) -> Self {
        let n = forms[0].nrows();
        CurvatureTensor::from_fn(n, |i, j, k, l| {
            forms
                .iter()
                .map(|h| h[(j, k)] * h[(i, l)] - h[(i, k)] * h[(j, l)])
                .sum()
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.n + j) * self.n + k) * self.n + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.components[self.idx(i, j, k, l)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        let id = self.idx(i, j, k, l);
        self.components[id] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &CurvatureTensor) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Residuals of the algebraic curvature identities, relative to
    /// `max(1, max|R|)`.
    pub fn symmetry_residuals(&self) -> SymmetryResiduals {
        let n = self.n;
        let scale = self.max_abs().max(1.0);
        let mut out = SymmetryResiduals {
            antisym_first: 0.0,
            antisym_last: 0.0,
            pair: 0.0,
            bianchi: 0.0,
        };
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let r = self.get(i, j, k, l);
                        out.antisym_first = out.antisym_first.max((r + self.get(j, i, k, l)).abs());
                        out.antisym_last = out.antisym_last.max((r + self.get(i, j, l, k)).abs());
                        out.pair = out.pair.max((r - self.get(k, l, i, j)).abs());
                        let b = r + self.get(j, k, i, l) + self.get(k, i, j, l);
                        out.bianchi = out.bianchi.max(b.abs());
                    }
                }
            }
        }
        out.antisym_first /= scale;
        out.antisym_last /= scale;
        out.pair /= scale;
        out.bianchi /= scale;
        out
    }

    /// The endomorphism `R(x, y)` as a matrix acting on frame components.
    pub fn endomorphism(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                let w = x[a] * y[b];
                if w == 0.0 {
                    continue;
                }
                for c in 0..n {
                    for l in 0..n {
                        m[(l, c)] += w * self.get(a, b, c, l);
                    }
                }
            }
        }
        m
    }

    /// `R(x, y) z`.
    pub fn apply(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let m = self.endomorphism(x, y);
        (m * DVector::from_column_slice(z)).as_slice().to_vec()
    }

    /// Sectional curvature of the plane spanned by `u`, `v`.
    pub fn sectional(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        let uu: f64 = u.iter().map(|a| a * a).sum();
        let vv: f64 = v.iter().map(|a| a * a).sum();
        let uv: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
        let area = uu * vv - uv * uv;
        if area <= 1e-24 * (uu * vv).max(f64::MIN_POSITIVE) {
            return Err(Error::DegeneratePlane);
        }
        let ruv = self.apply(u, v, v);
        let num: f64 = ruv.iter().zip(u).map(|(a, b)| a * b).sum();
        Ok(num / area)
    }

    /// `Ric(E_j, E_k) = Σ_i R_{ijki}`.
    pub fn ricci(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |j, k| (0..n).map(|i| self.get(i, j, k, i)).sum())
    }

    pub fn ricci_spectrum(&self) -> Vec<f64> {
        sym_eigenvalues(&self.ricci())
    }

    pub fn scalar(&self) -> f64 {
        self.ricci().trace()
    }

    /// Matrix of the curvature operator on `⋀²` in the basis `E_i ∧ E_j`
    /// (`i < j`), normalised so a round sphere has eigenvalue `+1`.
    pub fn curvature_operator(&self) -> DMatrix<f64> {
        let pairs = pairs(self.n);
        DMatrix::from_fn(pairs.len(), pairs.len(), |p, q| {
            let (i, j) = pairs[p];
            let (k, l) = pairs[q];
            self.get(i, j, l, k)
        })
    }

    pub fn curvature_operator_spectrum(&self) -> Vec<f64> {
        sym_eigenvalues(&self.curvature_operator())
    }

    /// Frobenius norm of `(a, b) ↦ R(E_a,E_b)·R` over `a < b`, with
    /// `R(E_a,E_b)` acting as a derivation on the tensor. Frame-independent.
    pub fn semi_symmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for (a, b) in pairs(n) {
            // e[c][l] = ⟨R(E_a,E_b)E_c, E_l⟩
            let e: Vec<Vec<f64>> = (0..n)
                .map(|c| (0..n).map(|l| self.get(a, b, c, l)).collect())
                .collect();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for m in 0..n {
                            let mut s = 0.0;
                            for l in 0..n {
                                s += e[i][l] * self.get(l, j, k, m)
                                    + e[j][l] * self.get(i, l, k, m)
                                    + e[k][l] * self.get(i, j, l, m)
                                    + e[m][l] * self.get(i, j, k, l);
                            }
                            total += s * s;
                        }
                    }
                }
            }
        }
        total.sqrt()
    }

    /// Components in the frame whose vectors are the columns of `q`.
    pub fn in_frame(&self, q: &DMatrix<f64>) -> CurvatureTensor {
        let n = self.n;
        // contract one slot at a time
        let mut cur = self.components.clone();
        for slot in 0..4 {
            let mut next = vec![0.0; cur.len()];
            let stride = n.pow(3 - slot as u32);
            for (idx, out) in next.iter_mut().enumerate() {
                let new_i = (idx / stride) % n;
                let base = idx - new_i * stride;
                let mut s = 0.0;
                for a in 0..n {
                    s += q[(a, new_i)] * cur[base + a * stride];
                }
                *out = s;
            }
            cur = next;
        }
        CurvatureTensor {
            n,
            components: cur,
            point: self.point.clone(),
        }
    }

    /// Embed `self` as the curvature of the first `self.dim()` factors of a
    /// product with a flat factor of dimension `extra`.
    pub fn product_with_flat(&self, extra: usize) -> CurvatureTensor {
        let n = self.n;
        let mut out = CurvatureTensor::zero(n + extra);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        out.set(i, j, k, l, self.get(i, j, k, l));
                    }
                }
            }
        }
        out
    }
}

pub fn pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push((i, j));
        }
    }
    out
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}
