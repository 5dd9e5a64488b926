//! Finite-difference curvature straight from chart metric components, and a
//! geodesic integrator.
//!
//! Nothing here uses jets, frames or connection tables: the only input is a
//! function returning the metric matrix at a chart point.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame_geometry::CurvatureTensor;

pub const DEFAULT_STEP: f64 = 1e-3;

pub trait Chart: Sync {
    fn dim(&self) -> usize;

    /// Metric components `g_ij` at `p`.
    fn metric(&self, p: &[f64]) -> Result<DMatrix<f64>>;
}

/// `ℝⁿ` with the standard metric.
#[derive(Debug, Clone, Copy)]
pub struct EuclideanChart(pub usize);

impl Chart for EuclideanChart {
    fn dim(&self) -> usize {
        self.0
    }

    fn metric(&self, _p: &[f64]) -> Result<DMatrix<f64>> {
        Ok(DMatrix::identity(self.0, self.0))
    }
}

/// Central differences with step `h`, optionally combined with step `h/2`
/// to cancel the leading error term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub h: f64,
    pub richardson: bool,
}

impl Stencil {
    pub fn richardson(h: f64) -> Self {
        Stencil { h, richardson: true }
    }

    pub fn plain(h: f64) -> Self {
        Stencil { h, richardson: false }
    }

    fn check(&self) -> Result<()> {
        if self.h > 0.0 && self.h.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("finite-difference step must be positive, got {}", self.h)))
        }
    }

    /// Derivative along coordinate `i` of a vector-valued function.
    fn derivative<F>(&self, p: &[f64], i: usize, f: &F) -> Result<Vec<f64>>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>>,
    {
        let central = |h: f64| -> Result<Vec<f64>> {
            let mut q = p.to_vec();
            q[i] = p[i] + h;
            let fp = f(&q)?;
            q[i] = p[i] - h;
            let fm = f(&q)?;
            Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        };
        let h = self.h;
        let d1 = central(h)?;
        if !self.richardson {
            return Ok(d1);
        }
        let d2 = central(h / 2.0)?;
        Ok(d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0).collect())
    }
}

/// Metric at `p`, rejecting asymmetric or indefinite matrices.
pub fn checked_metric(c: &dyn Chart, p: &[f64]) -> Result<DMatrix<f64>> {
    let g = c.metric(p)?;
    let n = c.dim();
    if g.nrows() != n || g.ncols() != n {
        return Err(Error::Shape(format!("metric must be {n}×{n}")));
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::Geometry(format!("metric not finite at {p:?}")));
    }
    let asym = (&g - g.transpose()).amax();
    if asym > 1e-14 * g.amax().max(1.0) {
        return Err(Error::Geometry(format!("metric not symmetric at {p:?} (residual {asym:e})")));
    }
    if g.clone().cholesky().is_none() {
        return Err(Error::Geometry(format!("metric not positive definite at {p:?}")));
    }
    Ok(g)
}

/// Coordinate Christoffel symbols, `gamma[(k·n + i)·n + j] = Γ^k_{ij}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    pub n: usize,
    pub gamma: Vec<f64>,
}

impl Christoffel {
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.gamma[(k * self.n + i) * self.n + j]
    }

    pub fn max_abs_diff(&self, other: &Christoffel) -> f64 {
        self.gamma
            .iter()
            .zip(&other.gamma)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `Γ^k_{ij} v^i w^j`.
    pub fn contract(&self, v: &[f64], w: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += self.get(k, i, j) * v[i] * w[j];
                    }
                }
                s
            })
            .collect()
    }
}

pub fn christoffel_fd(c: &dyn Chart, p: &[f64], h: f64) -> Result<Christoffel> {
    christoffel_with(c, p, Stencil::richardson(h))
}

pub fn christoffel_with(c: &dyn Chart, p: &[f64], st: Stencil) -> Result<Christoffel> {
    st.check()?;
    let n = c.dim();
    if p.len() != n {
        return Err(Error::Shape(format!("chart point must have {n} coordinates")));
    }
    let g = checked_metric(c, p)?;
    let ginv = g
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Geometry("metric not invertible".into()))?;
    let flat = |q: &[f64]| -> Result<Vec<f64>> { Ok(checked_metric(c, q)?.iter().copied().collect()) };
    // dg[m][(i, j)] = ∂_m g_ij, nalgebra storage is column-major
    let dg: Vec<DMatrix<f64>> = (0..n)
        .map(|m| st.derivative(p, m, &flat).map(|v| DMatrix::from_vec(n, n, v)))
        .collect::<Result<_>>()?;
    let mut gamma = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                }
                gamma[(k * n + i) * n + j] = 0.5 * s;
            }
        }
    }
    Ok(Christoffel { n, gamma })
}

/// Coordinate components `R_{ijkl} = ⟨R(∂_i,∂_j)∂_k, ∂_l⟩`.
pub fn coordinate_curvature(c: &dyn Chart, p: &[f64], st: Stencil) -> Result<CurvatureTensor> {
    let n = c.dim();
    let g = checked_metric(c, p)?;
    let gam = christoffel_with(c, p, st)?;
    let flat = |q: &[f64]| -> Result<Vec<f64>> { Ok(christoffel_with(c, q, st)?.gamma) };
    // dgam[m] = ∂_m Γ
    let dgam: Vec<Vec<f64>> = (0..n).map(|m| st.derivative(p, m, &flat)).collect::<Result<_>>()?;
    let d = |m: usize, k: usize, i: usize, j: usize| dgam[m][(k * n + i) * n + j];
    // R^l_{ijk} = ∂_i Γ^l_{jk} − ∂_j Γ^l_{ik} + Γ^m_{jk} Γ^l_{im} − Γ^m_{ik} Γ^l_{jm}
    let mut up = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut v = d(i, l, j, k) - d(j, l, i, k);
                    for m in 0..n {
                        v += gam.get(m, j, k) * gam.get(l, i, m) - gam.get(m, i, k) * gam.get(l, j, m);
                    }
                    up[((i * n + j) * n + k) * n + l] = v;
                }
            }
        }
    }
    Ok(CurvatureTensor::from_fn(n, |i, j, k, l| {
        (0..n).map(|m| up[((i * n + j) * n + k) * n + m] * g[(m, l)]).sum()
    })
    .with_point(p))
}

/// Gram–Schmidt of the columns of `reference` in the metric `g`.
pub fn orthonormalize_frame(g: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = g.nrows();
    let mut q = reference.clone();
    for a in 0..n {
        let mut v: DVector<f64> = q.column(a).into_owned();
        for b in 0..a {
            let u: DVector<f64> = q.column(b).into_owned();
            let c = (u.transpose() * g * &v)[(0, 0)];
            v -= u * c;
        }
        let nrm2 = (v.transpose() * g * &v)[(0, 0)];
        if !(nrm2 > 0.0) {
            return Err(Error::Geometry("reference frame is degenerate".into()));
        }
        q.set_column(a, &(v / nrm2.sqrt()));
    }
    Ok(q)
}

/// Curvature components in the orthonormal frame obtained from `reference`
/// (columns in chart components) by Gram–Schmidt.
pub fn curvature_fd(c: &dyn Chart, p: &[f64], h: f64, reference: &DMatrix<f64>) -> Result<CurvatureTensor> {
    curvature_with(c, p, Stencil::richardson(h), reference)
}

pub fn curvature_with(c: &dyn Chart, p: &[f64], st: Stencil, reference: &DMatrix<f64>) -> Result<CurvatureTensor> {
    let g = checked_metric(c, p)?;
    let q = orthonormalize_frame(&g, reference)?;
    Ok(coordinate_curvature(c, p, st)?.in_frame(&q).with_point(p))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicReport {
    /// About 200 chart points along the curve, endpoints included.
    pub trajectory: Vec<Vec<f64>>,
    pub arc_length: f64,
    /// `max |E(s) − E(0)| / E(0)` for `E = ⟨γ', γ'⟩`.
    pub energy_drift: f64,
    /// Euclidean chart distance between the endpoints.
    pub displacement: f64,
    /// Parameter reached; equals the requested length unless truncated.
    pub reached: f64,
    pub truncated: bool,
    pub steps: usize,
}

/// Local error target of [`integrate`], relative to `max(1, |y_i|)`.
pub const INTEGRATION_TOL: f64 = 1e-11;
const MAX_STEPS: usize = 200_000;
/// Beyond this condition number of `g` the chart metric is treated as no
/// longer evaluable.
pub const MAX_METRIC_CONDITION: f64 = 1e12;

/// Result of [`integrate`].
#[derive(Debug, Clone)]
pub struct Integration {
    /// State at every accepted step, the initial state first.
    pub states: Vec<Vec<f64>>,
    pub params: Vec<f64>,
    pub truncated: bool,
}

fn rk4_step<F>(f: &F, y: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let shift = |k: &[f64], a: f64| -> Vec<f64> { y.iter().zip(k).map(|(y, k)| y + a * k).collect() };
    let k1 = f(y)?;
    let k2 = f(&shift(&k1, h / 2.0))?;
    let k3 = f(&shift(&k2, h / 2.0))?;
    let k4 = f(&shift(&k3, h))?;
    Ok((0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// RK4 with step doubling for `y' = f(y)` over `[0, length]`, steps at most
/// `max_step`. `accept` sees every accepted state; an error from it or from
/// `f` on an already minimal step truncates the run.
pub fn integrate<F, A>(y0: &[f64], length: f64, max_step: f64, f: F, mut accept: A) -> Result<Integration>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
    A: FnMut(&[f64]) -> Result<()>,
{
    if !(max_step > 0.0) || !(length >= 0.0) {
        return Err(Error::Domain(format!(
            "integration needs a positive step and nonnegative length, got {max_step} and {length}"
        )));
    }
    let min_step = 1e-12 * length.max(1.0);
    let mut y = y0.to_vec();
    let mut t = 0.0;
    let mut h = max_step.min(length);
    let mut out = Integration {
        states: vec![y.clone()],
        params: vec![0.0],
        truncated: false,
    };
    while t < length {
        if out.states.len() > MAX_STEPS || h < min_step {
            out.truncated = true;
            break;
        }
        h = h.min(length - t);
        let trial = rk4_step(&f, &y, h).and_then(|one| {
            let mid = rk4_step(&f, &y, h / 2.0)?;
            Ok((one, rk4_step(&f, &mid, h / 2.0)?))
        });
        let Ok((one, two)) = trial else {
            h /= 4.0;
            continue;
        };
        let err = (0..y.len())
            .map(|i| (two[i] - one[i]).abs() / (15.0 * y[i].abs().max(1.0)))
            .fold(0.0, f64::max);
        if !err.is_finite() {
            h /= 4.0;
            continue;
        }
        let factor = if err == 0.0 { 4.0 } else { (0.9 * (INTEGRATION_TOL / err).powf(0.2)).clamp(0.1, 4.0) };
        if err > INTEGRATION_TOL {
            h *= factor;
            continue;
        }
        let next: Vec<f64> = (0..y.len()).map(|i| two[i] + (two[i] - one[i]) / 15.0).collect();
        if accept(&next).is_err() {
            out.truncated = true;
            break;
        }
        t = if length - t - h <= 1e-15 * length { length } else { t + h };
        y = next;
        out.states.push(y.clone());
        out.params.push(t);
        h = (h * factor).min(max_step);
    }
    Ok(out)
}

/// Builds the report from integrated `(x, ẋ)` states with energies `e`.
pub fn geodesic_report(integration: &Integration, n: usize, energies: &[f64]) -> GeodesicReport {
    let e0 = energies[0];
    let energy_drift = energies.iter().fold(0.0f64, |m, e| m.max((e - e0).abs() / e0));
    let mut arc = 0.0;
    for i in 1..energies.len() {
        let dt = integration.params[i] - integration.params[i - 1];
        arc += dt * (energies[i].sqrt() + energies[i - 1].sqrt()) / 2.0;
    }
    let states = &integration.states;
    let every = (states.len() / 200).max(1);
    let mut trajectory: Vec<Vec<f64>> = states.iter().step_by(every).map(|s| s[..n].to_vec()).collect();
    let last = states.last().expect("initial state is recorded")[..n].to_vec();
    if trajectory.last() != Some(&last) {
        trajectory.push(last.clone());
    }
    let displacement = last.iter().zip(&states[0]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    GeodesicReport {
        trajectory,
        arc_length: arc,
        energy_drift,
        displacement,
        reached: *integration.params.last().unwrap(),
        truncated: integration.truncated,
        steps: states.len() - 1,
    }
}

fn condition(g: &DMatrix<f64>) -> f64 {
    let ev = g.clone().symmetric_eigen().eigenvalues;
    ev.max() / ev.min()
}

/// Geodesic from `p` with initial direction `v` (chart components,
/// normalized in the metric), over arc length `length`. Christoffel symbols
/// come from [`christoffel_with`]; the run stops with `truncated` once the
/// metric condition number passes [`MAX_METRIC_CONDITION`].
pub fn geodesic_shoot(c: &dyn Chart, p: &[f64], v: &[f64], length: f64, step: f64) -> Result<GeodesicReport> {
    if !(step > 0.0) {
        return Err(Error::Domain(format!("geodesic step must be positive, got {step}")));
    }
    let n = c.dim();
    let st = Stencil::richardson(DEFAULT_STEP);
    let g0 = checked_metric(c, p)?;
    let v0 = DVector::from_column_slice(v);
    let speed = (v0.transpose() * &g0 * &v0)[(0, 0)].sqrt();
    if !(speed > 0.0) {
        return Err(Error::DegenerateField("initial direction has zero length".into()));
    }
    let mut y0 = p.to_vec();
    y0.extend(v.iter().map(|a| a / speed));
    let rhs = |y: &[f64]| -> Result<Vec<f64>> {
        let (x, u) = y.split_at(n);
        let gam = christoffel_with(c, x, st)?;
        let mut out = u.to_vec();
        out.extend(gam.contract(u, u).into_iter().map(|a| -a));
        Ok(out)
    };
    let energy = |y: &[f64]| -> Result<f64> {
        let g = checked_metric(c, &y[..n])?;
        if condition(&g) > MAX_METRIC_CONDITION {
            return Err(Error::Geometry("metric too ill-conditioned".into()));
        }
        let u = DVector::from_column_slice(&y[n..]);
        Ok((u.transpose() * g * &u)[(0, 0)])
    };
    let mut energies = vec![energy(&y0)?];
    let run = integrate(&y0, length, step, rhs, |y| {
        energies.push(energy(y)?);
        Ok(())
    })?;
    Ok(geodesic_report(&run, n, &energies))
}
