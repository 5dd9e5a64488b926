//! Almost-abelian group `S¹ ⋉_ρ V` and its deformation by `φ = log f(t)`.
//!
//! Chart `(θ, y¹..yᵐ)` for `(e^{iθ}, y)`; `ξ = ∂_θ` is vertical and the
//! left-invariant fields from `V` are `X_a = Σ_b ρ(θ)_{ba} ∂_{y_b}`.
//! Frame order is `(ξ̃, X_1, …, X_m)` with `ξ̃ = ξ / f`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ChartModel;
use crate::error::{Error, Result};
use crate::frame_geometry::{ConnectionTable, CurvatureTensor, OrthoFrame};
use crate::jets::{f_series, Jet};
use crate::oracle::Chart;
use crate::rng::SampleRng;
use crate::warp::{DeformedMetricSpec, GradientConstraint, WarpPointData};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlmostAbelianSpec {
    pub m: usize,
    pub weights: Vec<i64>,
    pub a: f64,
    pub c1: f64,
    pub c2: f64,
    pub z: Vec<f64>,
}

impl AlmostAbelianSpec {
    pub fn new(weights: Vec<i64>, a: f64, c1: f64, c2: f64, z: Vec<f64>) -> Self {
        AlmostAbelianSpec {
            m: 2 * weights.len(),
            weights,
            a,
            c1,
            c2,
            z,
        }
    }

    /// Checks the parameters and returns a copy with `Z` normalized.
    pub fn validated(&self) -> Result<AlmostAbelianSpec> {
        if self.m % 2 != 0 {
            return Err(Error::InvalidRepresentation(format!("m must be even, got m = {}", self.m)));
        }
        if self.m == 0 {
            return Err(Error::InvalidRepresentation("m must be positive".into()));
        }
        if self.weights.len() * 2 != self.m {
            return Err(Error::InvalidRepresentation(format!(
                "m = {} needs {} weights, got {}",
                self.m,
                self.m / 2,
                self.weights.len()
            )));
        }
        if let Some(i) = self.weights.iter().position(|&w| w == 0) {
            return Err(Error::InvalidRepresentation(format!(
                "weight {i} is zero; trivial summands are not allowed"
            )));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::Domain(format!("a must be positive, got {}", self.a)));
        }
        if self.c1 < 0.0 || self.c2 < 0.0 || !self.c1.is_finite() || !self.c2.is_finite() {
            return Err(Error::Domain("c1 and c2 must be nonnegative".into()));
        }
        if self.c1 + self.c2 == 0.0 {
            return Err(Error::DegenerateField(
                "c1 = c2 = 0 makes f vanish identically, log f undefined".into(),
            ));
        }
        if self.z.len() != self.m {
            return Err(Error::Shape(format!("Z must have {} components", self.m)));
        }
        let norm = self.z.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Domain("Z must be a nonzero vector".into()));
        }
        let mut out = self.clone();
        out.z.iter_mut().for_each(|x| *x /= norm);
        Ok(out)
    }

    /// `ρ(θ)`, block rotations by `wθ`.
    pub fn rho(&self, theta: f64) -> DMatrix<f64> {
        let mut r = DMatrix::zeros(self.m, self.m);
        for (k, &w) in self.weights.iter().enumerate() {
            let (s, c) = (w as f64 * theta).sin_cos();
            let i = 2 * k;
            r[(i, i)] = c;
            r[(i, i + 1)] = -s;
            r[(i + 1, i)] = s;
            r[(i + 1, i + 1)] = c;
        }
        r
    }

    /// `D = dρ(ξ)`, `D_{ba} = ⟨D e_a, e_b⟩`.
    pub fn d_rho(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.m, self.m);
        for (k, &w) in self.weights.iter().enumerate() {
            let i = 2 * k;
            d[(i, i + 1)] = -(w as f64);
            d[(i + 1, i)] = w as f64;
        }
        d
    }

    pub fn z_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.z)
    }

    pub fn f(&self, t: f64) -> f64 {
        self.c1 * (self.a * t).exp() + self.c2 * (-self.a * t).exp()
    }

    /// `φ_t = f'/f`.
    pub fn phi_t(&self, t: f64) -> f64 {
        let (ep, em) = (self.c1 * (self.a * t).exp(), self.c2 * (-self.a * t).exp());
        self.a * (ep - em) / (ep + em)
    }

    /// `φ_tt = a² − φ_t²`.
    pub fn phi_tt(&self, t: f64) -> f64 {
        self.a * self.a - self.phi_t(t).powi(2)
    }
}

#[derive(Debug, Clone)]
pub struct AlmostAbelianModel {
    pub spec: AlmostAbelianSpec,
    pub deformed: bool,
    frame: OrthoFrame,
}

fn rho_jets(weights: &[i64], theta: &Jet) -> Vec<Vec<Jet>> {
    let m = 2 * weights.len();
    let mut r = vec![vec![theta.constant_like(0.0); m]; m];
    for (k, &w) in weights.iter().enumerate() {
        let wt = theta * w as f64;
        let (s, c) = (wt.sin(), wt.cos());
        let i = 2 * k;
        r[i][i] = c.clone();
        r[i][i + 1] = -&s;
        r[i + 1][i] = s;
        r[i + 1][i + 1] = c;
    }
    r
}

impl AlmostAbelianModel {
    fn new(spec: &AlmostAbelianSpec, deformed: bool) -> Result<Self> {
        let spec = spec.validated()?;
        let mut labels = vec![if deformed { "xi~".to_string() } else { "xi".to_string() }];
        labels.extend((0..spec.m).map(|a| format!("X{}", a + 1)));
        let s = spec.clone();
        let frame = OrthoFrame::new(labels, move |x| {
            let m = s.m;
            let rho = rho_jets(&s.weights, &x[0]);
            let zero = x[0].constant_like(0.0);
            let mut fields = Vec::with_capacity(m + 1);
            let mut xi = vec![zero.clone(); m + 1];
            xi[0] = if deformed {
                s.f_jet(&s.t_jet_from(&rho, x)).recip()?
            } else {
                zero.constant_like(1.0)
            };
            fields.push(xi);
            for a in 0..m {
                let mut field = vec![zero.clone(); m + 1];
                for b in 0..m {
                    field[1 + b] = rho[b][a].clone();
                }
                fields.push(field);
            }
            Ok(fields)
        });
        Ok(AlmostAbelianModel { spec, deformed, frame })
    }

    /// `w = ρ(−θ)y` and `t = ⟨w, Z⟩`.
    pub fn height(&self, p: &[f64]) -> (DVector<f64>, f64) {
        let y = DVector::from_column_slice(&p[1..]);
        let w = self.spec.rho(p[0]).transpose() * y;
        let t = w.dot(&self.spec.z_vec());
        (w, t)
    }

    pub fn t(&self, p: &[f64]) -> f64 {
        self.height(p).1
    }

    /// `φ = log f(t)` as a jet over the chart.
    pub fn phi_jet(&self, p: &[f64], order: usize) -> Result<Jet> {
        let x = Jet::variables(p, order)?;
        let rho = rho_jets(&self.spec.weights, &x[0]);
        self.spec.f_jet(&self.spec.t_jet_from(&rho, &x)).ln()
    }

    pub fn t_jet(&self, p: &[f64], order: usize) -> Result<Jet> {
        let x = Jet::variables(p, order)?;
        let rho = rho_jets(&self.spec.weights, &x[0]);
        Ok(self.spec.t_jet_from(&rho, &x))
    }

    /// Curvature of the deformed metric as stated in closed form:
    /// `R̃(X,Y) = 0`, `R̃(ξ̃,X)Y = −a²⟨X,Z⟩⟨Y,Z⟩ξ̃`, `R̃(ξ̃,X)ξ̃ = a²⟨X,Z⟩Z`.
    pub fn table_curvature(&self) -> CurvatureTensor {
        let a2 = self.spec.a * self.spec.a;
        let z = &self.spec.z;
        let n = self.spec.m + 1;
        let mut r = CurvatureTensor::zero(n);
        for x in 0..self.spec.m {
            for y in 0..self.spec.m {
                let v = a2 * z[x] * z[y];
                let (i, j) = (1 + x, 1 + y);
                // ⟨R̃(ξ̃,X)Y, ξ̃⟩ = −a² z_x z_y and ⟨R̃(ξ̃,X)ξ̃, Y⟩ = a² z_x z_y
                r.set(0, i, j, 0, -v);
                r.set(0, i, 0, j, v);
                r.set(i, 0, 0, j, -v);
                r.set(i, 0, j, 0, v);
            }
        }
        r
    }

    /// Connection of the deformed frame in closed form, as jets over the
    /// chart: `∇̃_X Y = 0`, `∇̃_ξ̃ ξ̃ = −φ_t Z`, `∇̃_ξ̃ X = TX + φ_t⟨X,Z⟩ξ̃`,
    /// `T = D/f`.
    pub fn table_connection_jets(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        let s = &self.spec;
        let m = s.m;
        let n = m + 1;
        let x = Jet::variables(p, order)?;
        let zero = x[0].constant_like(0.0);
        let mut gamma = vec![zero.clone(); n * n * n];
        if !self.deformed {
            let d = s.d_rho();
            for a in 0..m {
                for b in 0..m {
                    gamma[(1 + a) * n + 1 + b] = zero.constant_like(d[(b, a)]);
                }
            }
            return Ok(gamma);
        }
        let rho = rho_jets(&s.weights, &x[0]);
        let t = s.t_jet_from(&rho, &x);
        let f = s.f_jet(&t);
        let fp = t.compose(&f_series(s.a * s.c1, -s.a * s.c2, s.a, t.value(), t.order()));
        let finv = f.recip()?;
        let phi_t = &fp * &finv;
        let d = s.d_rho();
        for a in 0..m {
            let za = s.z[a];
            gamma[(0 * n) * n + 1 + a] = &phi_t * -za;
            gamma[(1 + a) * n] = &phi_t * za;
            for b in 0..m {
                if d[(b, a)] != 0.0 {
                    gamma[(1 + a) * n + 1 + b] = &finv * d[(b, a)];
                }
            }
        }
        Ok(gamma)
    }

    /// Frame derivatives `ξ(t)` and `ξξ(t)`.
    fn xi_t(&self, w: &DVector<f64>) -> (f64, f64) {
        let d = self.spec.d_rho();
        let dz = &d * self.spec.z_vec();
        let ddz = &d * &dz;
        (w.dot(&dz), w.dot(&ddz))
    }

    fn undeformed_connection(&self) -> ConnectionTable {
        let m = self.spec.m;
        let n = m + 1;
        let d = self.spec.d_rho();
        let mut c = ConnectionTable::zero(n);
        for a in 0..m {
            for b in 0..m {
                c.set(0, 1 + a, 1 + b, d[(b, a)]);
            }
        }
        c
    }

    /// Hessian of `φ` in the undeformed frame `(ξ, X_a)`.
    pub fn hessian(&self, p: &[f64]) -> DMatrix<f64> {
        let s = &self.spec;
        let m = s.m;
        let (w, t) = self.height(p);
        let (xt, xxt) = self.xi_t(&w);
        let (pt, ptt) = (s.phi_t(t), s.phi_tt(t));
        let dz = s.d_rho() * s.z_vec();
        let mut h = DMatrix::zeros(m + 1, m + 1);
        h[(0, 0)] = ptt * xt * xt + pt * xxt;
        for a in 0..m {
            let v = ptt * xt * s.z[a] + pt * dz[a];
            h[(0, 1 + a)] = v;
            h[(1 + a, 0)] = v;
            for b in 0..m {
                h[(1 + a, 1 + b)] = ptt * s.z[a] * s.z[b];
            }
        }
        h
    }

    /// `E_i(φ)` in the undeformed frame.
    pub fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let (w, t) = self.height(p);
        let pt = self.spec.phi_t(t);
        let mut g = vec![pt * self.xi_t(&w).0];
        g.extend(self.spec.z.iter().map(|z| pt * z));
        g
    }
}

impl AlmostAbelianSpec {
    fn t_jet_from(&self, rho: &[Vec<Jet>], x: &[Jet]) -> Jet {
        // t = Σ_{b,c} ρ(θ)_{cb} y_c Z_b
        let mut t = x[0].constant_like(0.0);
        for (b, &zb) in self.z.iter().enumerate() {
            if zb == 0.0 {
                continue;
            }
            for c in 0..self.m {
                let term = &rho[c][b] * &x[1 + c];
                t.axpy(zb, &term);
            }
        }
        t
    }

    fn f_jet(&self, t: &Jet) -> Jet {
        t.compose(&f_series(self.c1, self.c2, self.a, t.value(), t.order()))
    }
}

pub fn build_almost_abelian(spec: &AlmostAbelianSpec) -> Result<AlmostAbelianModel> {
    AlmostAbelianModel::new(spec, true)
}

/// The left-invariant (flat) metric the deformation starts from.
pub fn build_flat_almost_abelian(spec: &AlmostAbelianSpec) -> Result<AlmostAbelianModel> {
    AlmostAbelianModel::new(spec, false)
}

impl Chart for AlmostAbelianModel {
    fn dim(&self) -> usize {
        self.spec.m + 1
    }

    fn metric(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.spec.m + 1;
        let mut g = DMatrix::identity(n, n);
        if self.deformed {
            g[(0, 0)] = self.spec.f(self.t(p)).powi(2);
        }
        Ok(g)
    }
}

impl ChartModel for AlmostAbelianModel {
    fn name(&self) -> String {
        if self.deformed { "almost_abelian" } else { "almost_abelian_flat" }.into()
    }

    fn frame(&self) -> &OrthoFrame {
        &self.frame
    }

    fn warp_data(&self, p: &[f64]) -> Result<WarpPointData> {
        let n = self.spec.m + 1;
        let conn = self.undeformed_connection();
        if !self.deformed {
            return WarpPointData::from_connection(
                1,
                conn,
                CurvatureTensor::zero(n),
                0.0,
                vec![0.0; n],
                DMatrix::zeros(n, n),
                p.to_vec(),
            );
        }
        let t = self.t(p);
        WarpPointData::from_connection(
            1,
            conn,
            CurvatureTensor::zero(n),
            self.spec.f(t).ln(),
            self.gradient(p),
            self.hessian(p),
            p.to_vec(),
        )
    }

    fn warp_spec(&self) -> DeformedMetricSpec {
        let m = self.clone();
        DeformedMetricSpec::new(self.name(), GradientConstraint::Unconstrained, move |p| m.warp_data(p))
    }

    fn sample_point(&self, rng: &mut SampleRng) -> Vec<f64> {
        let mut p = vec![rng.uniform(0.0, 2.0 * PI)];
        p.extend((0..self.spec.m).map(|_| rng.uniform(-1.5, 1.5)));
        p
    }

    fn basepoint(&self) -> Vec<f64> {
        vec![0.0; self.spec.m + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame_geometry::levi_civita;

    fn cyclic_spec() -> AlmostAbelianSpec {
        let s = 0.5f64.sqrt();
        AlmostAbelianSpec::new(vec![1, 2], 1.0, 1.0, 1.0, vec![s, 0.0, s, 0.0])
    }

    #[test]
    fn validation() {
        let mut s = cyclic_spec();
        s.m = 3;
        let e = s.validated().unwrap_err();
        assert!(e.to_string().contains("m must be even"));
        let s = AlmostAbelianSpec::new(vec![1, 0], 1.0, 1.0, 1.0, vec![1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(s.validated(), Err(Error::InvalidRepresentation(_))));
        let s = AlmostAbelianSpec::new(vec![1, 2], 1.0, 0.0, 0.0, vec![1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(s.validated(), Err(Error::DegenerateField(_))));
        let s = AlmostAbelianSpec::new(vec![1], 1.0, 1.0, 0.0, vec![3.0, 4.0]);
        assert_eq!(s.validated().unwrap().z, vec![0.6, 0.8]);
    }

    #[test]
    fn rho_is_orthogonal_and_d_rho_skew() {
        let s = cyclic_spec();
        for th in [0.0, 0.7, 2.5, -4.0] {
            let r = s.rho(th);
            assert!((&r * r.transpose() - DMatrix::identity(4, 4)).amax() < 1e-15);
        }
        let d = s.d_rho();
        assert_eq!(&d + d.transpose(), DMatrix::zeros(4, 4));
        let h = 1e-6;
        let fd = (s.rho(0.3 + h) - s.rho(0.3 - h)) / (2.0 * h);
        assert!((fd - s.rho(0.3) * &d).amax() < 1e-9);
    }

    #[test]
    fn height_has_horizontal_gradient_z() {
        let m = build_flat_almost_abelian(&cyclic_spec()).unwrap();
        let mut rng = SampleRng::new(11);
        for _ in 0..20 {
            let p = m.sample_point(&mut rng);
            let fj = m.frame().jets(&p, 1).unwrap();
            let t = m.t_jet(&p, 1).unwrap();
            for a in 0..4 {
                let xt = fj.derive(1 + a, &t).unwrap().value();
                assert!((xt - m.spec.z[a]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn undeformed_connection_from_engine() {
        let m = build_flat_almost_abelian(&cyclic_spec()).unwrap();
        let p = [1.3, 0.2, -0.5, 0.9, 0.1];
        let lc = levi_civita(m.frame(), &p, 1).unwrap();
        assert!(lc.table().max_abs_diff(&m.undeformed_connection()) < 1e-13);
        assert!(lc.curvature().unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn table_connection_matches_engine() {
        let m = build_almost_abelian(&cyclic_spec()).unwrap();
        let p = [0.4, 0.3, -0.2, 1.1, 0.6];
        let lc = levi_civita(m.frame(), &p, 2).unwrap();
        let table = m.table_connection_jets(&p, 2).unwrap();
        for (a, b) in lc.gamma.iter().zip(&table) {
            assert!(a.max_abs_diff(b) < 1e-12);
        }
    }

    #[test]
    fn hessian_and_gradient_match_jets() {
        let m = build_almost_abelian(&cyclic_spec()).unwrap();
        let flat = build_flat_almost_abelian(&cyclic_spec()).unwrap();
        let p = [0.9, -0.3, 0.4, 0.8, -1.2];
        let lc = levi_civita(flat.frame(), &p, 1).unwrap();
        let phi = m.phi_jet(&p, 2).unwrap();
        let fj = &lc.frame;
        let n = 5;
        let grad: Vec<Jet> = (0..n).map(|i| fj.derive(i, &phi).unwrap()).collect();
        let g = m.gradient(&p);
        let h = m.hessian(&p);
        for i in 0..n {
            assert!((grad[i].value() - g[i]).abs() < 1e-12);
            for j in 0..n {
                let mut v = fj.derive(i, &grad[j]).unwrap().value();
                for k in 0..n {
                    v -= lc.gamma[(i * n + j) * n + k].value() * grad[k].value();
                }
                assert!((v - h[(i, j)]).abs() < 1e-12, "{i}{j}");
            }
        }
    }

    #[test]
    fn horizontal_hessian_kills_z_perp() {
        let m = build_almost_abelian(&cyclic_spec()).unwrap();
        let h = m.hessian(&[0.3, 0.5, 0.5, -0.5, 0.2]);
        let s = 0.5f64.sqrt();
        let x = [s, 0.0, -s, 0.0];
        for b in 0..4 {
            let v: f64 = (0..4).map(|a| x[a] * h[(1 + a, 1 + b)]).sum();
            assert!(v.abs() < 1e-14);
        }
    }
}
