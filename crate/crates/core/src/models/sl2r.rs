//! Left-invariant metric on SL(2,ℝ) and its deformations along the compact
//! factor.
//!
//! Chart `(u, v, θ) ↦ k(θ)·n(u)·a(v)` with
//! `k(θ) = exp(θX)`, `n(u) = exp(uY)`, `a(v) = exp(vT)` and
//! `X = [[0,1],[−1,0]]`, `Y = [[0,1],[0,0]]`, `T = ½diag(1,−1)`.
//! Frame order is `(X, Y, T)`; `X` spans the fibers of `G → G/K`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ChartModel;
use crate::error::{Error, Result};
use crate::frame_geometry::{left_invariant, structure_from_brackets, ConnectionTable, CurvatureTensor, OrthoFrame};
use crate::jets::{invert_jet_matrix, Jet, ScalarField};
use crate::oracle::Chart;
use crate::rng::SampleRng;
use crate::warp::{DeformedMetricSpec, GradientConstraint, WarpPointData};

pub const U: usize = 0;
pub const V: usize = 1;
pub const THETA: usize = 2;

/// Structure constants of `(X, Y, T)`: `[X,Y] = 2T`, `[T,X] = −X + 2Y`, `[T,Y] = Y`.
pub fn sl2_structure() -> Vec<f64> {
    structure_from_brackets(
        3,
        &[
            (0, 1, vec![0.0, 0.0, 2.0]),
            (0, 2, vec![1.0, -2.0, 0.0]),
            (1, 2, vec![0.0, -1.0, 0.0]),
        ],
    )
}

/// Connection of the left-invariant metric making `(X, Y, T)` orthonormal.
pub fn lc0_table() -> ConnectionTable {
    let (x, y, t) = (0, 1, 2);
    let mut c = ConnectionTable::zero(3);
    // ∇_X T = X − 2Y, ∇_Y T = −Y
    c.set(x, t, x, 1.0);
    c.set(x, t, y, -2.0);
    c.set(y, t, y, -1.0);
    // ∇_X X = −T, ∇_Y Y = T, ∇_X Y = 2T
    c.set(x, x, t, -1.0);
    c.set(y, y, t, 1.0);
    c.set(x, y, t, 2.0);
    c
}

/// `φ(θ) = Σ_k a_k cos kθ + b_k sin kθ`, `k ≥ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PeriodicPhi {
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl PeriodicPhi {
    pub fn zero() -> Self {
        PeriodicPhi::default()
    }

    pub fn epsilon_cos(eps: f64) -> Self {
        PeriodicPhi {
            cos: vec![eps],
            sin: vec![],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.cos.iter().chain(&self.sin).all(|&c| c == 0.0)
    }

    fn terms(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let n = self.cos.len().max(self.sin.len());
        (0..n).map(move |k| {
            (
                (k + 1) as f64,
                self.cos.get(k).copied().unwrap_or(0.0),
                self.sin.get(k).copied().unwrap_or(0.0),
            )
        })
    }

    /// `d^r φ / dθ^r` at `θ`.
    pub fn derivative(&self, theta: f64, r: u32) -> f64 {
        self.terms()
            .map(|(k, a, b)| {
                let (s, c) = (k * theta).sin_cos();
                // d^r cos = k^r cos(kθ + rπ/2), d^r sin = k^r sin(kθ + rπ/2)
                let (sr, cr) = match r % 4 {
                    0 => (s, c),
                    1 => (c, -s),
                    2 => (-s, -c),
                    _ => (-c, s),
                };
                k.powi(r as i32) * (a * cr + b * sr)
            })
            .sum()
    }

    pub fn value(&self, theta: f64) -> f64 {
        self.derivative(theta, 0)
    }

    pub fn jet(&self, theta: &Jet) -> Jet {
        let mut out = theta.constant_like(0.0);
        for (k, a, b) in self.terms() {
            let kt = theta * k;
            if a != 0.0 {
                out.axpy(a, &kt.cos());
            }
            if b != 0.0 {
                out.axpy(b, &kt.sin());
            }
        }
        out
    }

    pub fn bound(&self) -> f64 {
        self.terms().map(|(_, a, b)| a.abs() + b.abs()).sum()
    }

    /// Largest `|φ|` over `samples` equally spaced angles.
    pub fn sampled_max(&self, samples: usize) -> f64 {
        (0..samples)
            .map(|i| self.value(2.0 * PI * i as f64 / samples as f64).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct SL2RModel {
    pub phi: PeriodicPhi,
    undeformed: OrthoFrame,
    frame: OrthoFrame,
}

/// Group element `k(θ)n(u)a(v)` as a 2×2 matrix of jets, row-major.
fn group_element(x: &[Jet]) -> [Jet; 4] {
    let (u, v, th) = (&x[U], &x[V], &x[THETA]);
    let (c, s) = (th.cos(), th.sin());
    let ep = (v * 0.5).exp();
    let em = (v * -0.5).exp();
    // k = [[c, s], [−s, c]], n = [[1, u], [0, 1]], a = diag(ep, em)
    let k_n = [c.clone(), &c * u + &s, -&s, &c - &(&s * u)];
    [&k_n[0] * &ep, &k_n[1] * &em, &k_n[2] * &ep, &k_n[3] * &em]
}

fn left_invariant_frame(x: &[Jet]) -> Result<Vec<Vec<Jet>>> {
    let point: Vec<f64> = x.iter().map(Jet::value).collect();
    let order = x[0].order();
    let xs = Jet::variables(&point, order + 1)?;
    let g = group_element(&xs);
    // g⁻¹ is the adjugate, det g = 1
    let ginv = [g[3].clone(), -&g[1], -&g[2], g[0].clone()];
    // coframe[α][i]: coefficient of basis α in g⁻¹ ∂_i g
    let mut coframe = vec![Vec::with_capacity(3); 3];
    for i in 0..3 {
        let dg: Vec<Jet> = g.iter().map(|e| e.derivative(i)).collect::<Result<_>>()?;
        let gi: Vec<Jet> = ginv.iter().map(|e| e.truncate(order)).collect();
        let m = |r: usize, c: usize| &(&gi[2 * r] * &dg[c]) + &(&gi[2 * r + 1] * &dg[2 + c]);
        let (p, q, r) = (m(0, 0), m(0, 1), m(1, 0));
        // p·[[1,0],[0,−1]] + q E12 + r E21 = x X + y Y + t T
        coframe[0].push(-&r);
        coframe[1].push(&q + &r);
        coframe[2].push(&p * 2.0);
    }
    let frame = invert_jet_matrix(&coframe)?;
    // frame[i][α] is the i-th chart component of field α
    Ok((0..3).map(|a| (0..3).map(|i| frame[i][a].clone()).collect()).collect())
}

pub fn build_sl2r(phi: PeriodicPhi) -> Result<SL2RModel> {
    let labels = |x: &str| vec![x.to_string(), "Y".to_string(), "T".to_string()];
    let undeformed = OrthoFrame::new(labels("X"), left_invariant_frame);
    let p = phi.clone();
    let scale = ScalarField::new(3, move |x| Ok((-p.jet(&x[THETA])).exp()));
    let frame = undeformed.scaled(labels("X~"), vec![Some(scale), None, None]);
    let cond = frame.condition_number(&[0.0, 0.0, 0.0])?;
    if !cond.is_finite() {
        return Err(Error::Geometry("frame matrix singular at the identity".into()));
    }
    Ok(SL2RModel {
        phi,
        undeformed,
        frame,
    })
}

impl SL2RModel {
    pub fn undeformed_frame(&self) -> &OrthoFrame {
        &self.undeformed
    }

    /// Left-invariant coframe rows `θ^X, θ^Y, θ^T` in `(du, dv, dθ)`.
    pub fn coframe(p: &[f64]) -> DMatrix<f64> {
        let (u, v) = (p[U], p[V]);
        let (ep, em) = (v.exp(), (-v).exp());
        DMatrix::from_row_slice(3, 3, &[0.0, 0.0, ep, em, 0.0, em * (1.0 + u * u) - ep, 0.0, 1.0, 2.0 * u])
    }

    /// `X, Y, T` in chart components, columns.
    pub fn left_invariant_fields(p: &[f64]) -> DMatrix<f64> {
        let (u, v) = (p[U], p[V]);
        let (ep, em) = (v.exp(), (-v).exp());
        DMatrix::from_row_slice(
            3,
            3,
            &[
                ep - (1.0 + u * u) * em,
                ep,
                0.0,
                -2.0 * u * em,
                0.0,
                1.0,
                em,
                0.0,
                0.0,
            ],
        )
    }

    /// `X(φ)`, the only nonzero frame derivative of `φ`.
    pub fn x_phi(&self, p: &[f64]) -> f64 {
        (-p[V]).exp() * self.phi.derivative(p[THETA], 1)
    }

    /// Hessian of `φ` in the undeformed frame.
    pub fn hessian(&self, p: &[f64]) -> DMatrix<f64> {
        let (u, v, th) = (p[U], p[V], p[THETA]);
        let d1 = self.phi.derivative(th, 1);
        let d2 = self.phi.derivative(th, 2);
        let em = (-v).exp();
        let mut h = DMatrix::zeros(3, 3);
        h[(0, 0)] = em * em * (d2 + 2.0 * u * d1);
        h[(0, 2)] = -em * d1;
        h[(2, 0)] = -em * d1;
        h
    }

    pub fn undeformed_curvature() -> CurvatureTensor {
        left_invariant(3, &sl2_structure()).1
    }
}

impl Chart for SL2RModel {
    fn dim(&self) -> usize {
        3
    }

    /// `e^{2φ}(θ^X)² + (θ^Y)² + (θ^T)²`.
    fn metric(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let th = Self::coframe(p);
        let w = (2.0 * self.phi.value(p[THETA])).exp();
        let mut g = DMatrix::zeros(3, 3);
        for (a, wa) in [(0, w), (1, 1.0), (2, 1.0)] {
            let row = th.row(a);
            g += row.transpose() * row * wa;
        }
        Ok(g)
    }
}

impl ChartModel for SL2RModel {
    fn name(&self) -> String {
        "sl2r".into()
    }

    fn frame(&self) -> &OrthoFrame {
        &self.frame
    }

    /// Closed form, usable far from the identity where inverting the
    /// coframe loses precision.
    fn frame_matrix(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let mut e = Self::left_invariant_fields(p);
        let s = (-self.phi.value(p[THETA])).exp();
        e.column_mut(0).scale_mut(s);
        Ok(e)
    }

    fn warp_data(&self, p: &[f64]) -> Result<WarpPointData> {
        WarpPointData::from_connection(
            1,
            lc0_table(),
            Self::undeformed_curvature(),
            self.phi.value(p[THETA]),
            vec![self.x_phi(p), 0.0, 0.0],
            self.hessian(p),
            p.to_vec(),
        )
    }

    fn warp_spec(&self) -> DeformedMetricSpec {
        let m = self.clone();
        DeformedMetricSpec::new("sl2r", GradientConstraint::Vertical, move |p| m.warp_data(p))
    }

    fn sample_point(&self, rng: &mut SampleRng) -> Vec<f64> {
        vec![rng.uniform(-1.5, 1.5), rng.uniform(-1.0, 1.0), rng.uniform(0.0, 2.0 * PI)]
    }

    fn basepoint(&self) -> Vec<f64> {
        vec![0.0; 3]
    }
}
