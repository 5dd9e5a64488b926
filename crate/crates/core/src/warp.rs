//! Connection and curvature of a vertically rescaled metric
//! `⟨u,v⟩_φ = ⟨u^h,v^h⟩ + e^{2φ}⟨u^v,v^v⟩` on the total space of an
//! integrable Riemannian submersion, in closed form.
//!
//! Frames are orthonormal for the undeformed metric with the vertical
//! directions first: indices `0..v_dim` vertical, `v_dim..n` horizontal.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame_geometry::{ConnectionTable, CurvatureTensor};
use crate::nullity;
use crate::par::{self, Execution};

#[derive(Debug, Clone)]
pub struct WarpPointData {
    pub h_dim: usize,
    pub v_dim: usize,
    pub conn: ConnectionTable,
    pub curvature: CurvatureTensor,
    /// Per horizontal direction `X`: `shape[x][(k, u)] = ⟨S_X U_u, U_k⟩`.
    pub shape: Vec<DMatrix<f64>>,
    /// Per horizontal direction `X`: `sigma[x][(u, v)] = ⟨σ(U_u, U_v), X⟩`.
    pub sigma: Vec<DMatrix<f64>>,
    pub phi_value: f64,
    /// `E_i(φ)` for every frame index.
    pub grad: Vec<f64>,
    /// `Hess_φ(E_i, E_j)` for the undeformed metric.
    pub hess: DMatrix<f64>,
    pub point: Vec<f64>,
}

impl WarpPointData {
    /// Fills `S` and `σ` from the connection: `⟨σ(U,V),X⟩ = Γ(U,V,X)`,
    /// `⟨S_X U, V⟩ = −Γ(U,X,V)`.
    pub fn from_connection(
        v_dim: usize,
        conn: ConnectionTable,
        curvature: CurvatureTensor,
        phi_value: f64,
        grad: Vec<f64>,
        hess: DMatrix<f64>,
        point: Vec<f64>,
    ) -> Result<Self> {
        let n = conn.n;
        if curvature.dim() != n || grad.len() != n || hess.nrows() != n || hess.ncols() != n || v_dim > n {
            return Err(Error::Shape("warp data dimensions disagree".into()));
        }
        let h_dim = n - v_dim;
        let shape = (0..h_dim)
            .map(|x| {
                let xi = v_dim + x;
                DMatrix::from_fn(v_dim, v_dim, |k, u| -conn.get(u, xi, k))
            })
            .collect();
        let sigma = (0..h_dim)
            .map(|x| {
                let xi = v_dim + x;
                DMatrix::from_fn(v_dim, v_dim, |u, v| conn.get(u, v, xi))
            })
            .collect();
        Ok(WarpPointData {
            h_dim,
            v_dim,
            conn,
            curvature,
            shape,
            sigma,
            phi_value,
            grad,
            hess,
            point,
        })
    }

    pub fn n(&self) -> usize {
        self.h_dim + self.v_dim
    }

    pub fn is_vertical(&self, i: usize) -> bool {
        i < self.v_dim
    }

    pub fn grad_h(&self) -> &[f64] {
        &self.grad[self.v_dim..]
    }

    pub fn grad_v(&self) -> &[f64] {
        &self.grad[..self.v_dim]
    }

    /// `max |⟨σ(U,V),X⟩ − ⟨S_X U,V⟩|`.
    pub fn adjointness_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (s, sg) in self.shape.iter().zip(&self.sigma) {
            for u in 0..self.v_dim {
                for v in 0..self.v_dim {
                    worst = worst.max((sg[(u, v)] - s[(v, u)]).abs());
                }
            }
        }
        worst
    }

    pub fn hessian_asymmetry(&self) -> f64 {
        (&self.hess - self.hess.transpose()).amax()
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let a = self.adjointness_residual();
        if a > tol {
            return Err(Error::Geometry(format!("σ and S are not adjoint (residual {a:e})")));
        }
        let h = self.hessian_asymmetry();
        if h > tol {
            return Err(Error::Geometry(format!("Hessian not symmetric (residual {h:e})")));
        }
        Ok(())
    }

    /// `max |σ(U,V) − ⟨U,V⟩H|` with `H` the mean curvature vector.
    pub fn umbilicity_residual(&self) -> f64 {
        let v = self.v_dim as f64;
        let mut worst: f64 = 0.0;
        for sg in &self.sigma {
            let h = sg.trace() / v;
            for a in 0..self.v_dim {
                for b in 0..self.v_dim {
                    let ideal = if a == b { h } else { 0.0 };
                    worst = worst.max((sg[(a, b)] - ideal).abs());
                }
            }
        }
        worst
    }

    pub fn shape_norm(&self) -> f64 {
        self.shape.iter().fold(0.0, |m, s| m.max(s.amax()))
    }

    fn horizontal_part(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(i, &x)| if self.is_vertical(i) { 0.0 } else { x })
            .collect()
    }

    fn vertical_part(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(i, &x)| if self.is_vertical(i) { x } else { 0.0 })
            .collect()
    }

    fn derivative_along(&self, v: &[f64]) -> f64 {
        dot(v, &self.grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Part {
    Horizontal,
    Vertical,
}

/// A constant-coefficient combination of the undeformed frame fields,
/// tagged by the distribution it lies in.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedVector {
    pub part: Option<Part>,
    pub components: Vec<f64>,
}

impl TaggedVector {
    pub fn horizontal(components: Vec<f64>) -> Self {
        TaggedVector {
            part: Some(Part::Horizontal),
            components,
        }
    }

    pub fn vertical(components: Vec<f64>) -> Self {
        TaggedVector {
            part: Some(Part::Vertical),
            components,
        }
    }

    pub fn untagged(components: Vec<f64>) -> Self {
        TaggedVector { part: None, components }
    }

    /// Tags a vector that lies purely in one distribution.
    pub fn classify(v_dim: usize, components: Vec<f64>) -> Self {
        let vert = components[..v_dim].iter().any(|&x| x != 0.0);
        let hor = components[v_dim..].iter().any(|&x| x != 0.0);
        let part = match (vert, hor) {
            (true, false) => Some(Part::Vertical),
            (false, _) => Some(Part::Horizontal),
            (true, true) => None,
        };
        TaggedVector { part, components }
    }

    pub fn basis(v_dim: usize, n: usize, i: usize) -> Self {
        let mut c = vec![0.0; n];
        c[i] = 1.0;
        Self::classify(v_dim, c)
    }

    fn checked(&self, d: &WarpPointData) -> Result<Part> {
        if self.components.len() != d.n() {
            return Err(Error::Shape("vector length differs from frame dimension".into()));
        }
        let part = self.part.ok_or(Error::Classification)?;
        let stray = match part {
            Part::Horizontal => &self.components[..d.v_dim],
            Part::Vertical => &self.components[d.v_dim..],
        };
        if stray.iter().any(|&x| x != 0.0) {
            return Err(Error::Classification);
        }
        Ok(part)
    }
}

/// `∇̃_a b` in components along the undeformed frame.
pub fn deformed_connection(d: &WarpPointData, a: &TaggedVector, b: &TaggedVector) -> Result<Vec<f64>> {
    let pa = a.checked(d)?;
    let pb = b.checked(d)?;
    let (ac, bc) = (&a.components, &b.components);
    let nab = d.conn.covariant(ac, bc);
    let out = match (pa, pb) {
        (Part::Horizontal, Part::Horizontal) => nab,
        (Part::Vertical, Part::Horizontal) => {
            let bracket: Vec<f64> = nab.iter().zip(d.conn.covariant(bc, ac)).map(|(x, y)| x - y).collect();
            let xphi = d.derivative_along(bc);
            let mut v = d.vertical_part(&nab);
            axpy(&mut v, xphi, ac);
            add(&v, &d.horizontal_part(&bracket))
        }
        (Part::Horizontal, Part::Vertical) => {
            let xphi = d.derivative_along(ac);
            let mut v = d.vertical_part(&nab);
            axpy(&mut v, xphi, bc);
            v
        }
        (Part::Vertical, Part::Vertical) => {
            let uv = dot(ac, bc);
            let e2 = (2.0 * d.phi_value).exp();
            let mut h = d.horizontal_part(&nab);
            axpy(&mut h, -uv, &d.horizontal_part(&d.grad));
            h.iter_mut().for_each(|x| *x *= e2);
            let mut v = d.vertical_part(&nab);
            axpy(&mut v, d.derivative_along(ac), bc);
            axpy(&mut v, d.derivative_along(bc), ac);
            axpy(&mut v, -uv, &d.vertical_part(&d.grad));
            add(&h, &v)
        }
    };
    Ok(out)
}

/// Connection table of the deformed orthonormal frame `Ẽ_i = s_i E_i`,
/// `s_i = e^{−φ}` on vertical and `1` on horizontal indices.
pub fn deformed_frame_connection(d: &WarpPointData) -> Result<ConnectionTable> {
    let n = d.n();
    let s: Vec<f64> = (0..n)
        .map(|i| if d.is_vertical(i) { (-d.phi_value).exp() } else { 1.0 })
        .collect();
    let mut t = ConnectionTable::zero(n);
    for i in 0..n {
        let ei = TaggedVector::basis(d.v_dim, n, i);
        for j in 0..n {
            let ej = TaggedVector::basis(d.v_dim, n, j);
            let beta = deformed_connection(d, &ei, &ej)?;
            for k in 0..n {
                let mut v = s[i] * s[j] * beta[k];
                if d.is_vertical(j) && j == k {
                    v -= s[i] * s[j] * d.grad[i];
                }
                t.set(i, j, k, v / s[k]);
            }
        }
    }
    Ok(t)
}

/// The four component families of `R̃`, valid for any fiber dimension.
/// Vectors are given along the undeformed frame.
#[derive(Debug, Clone)]
pub struct CurvatureFamilies {
    pub v_dim: usize,
    pub h_dim: usize,
    /// `R̃(X,Y,Z,W)` for horizontal arguments, indexed `((x·h + y)·h + z)·h + w`.
    pub horizontal: Vec<f64>,
    /// `R̃(X,V)Y`, indexed `(x·v + u)·h + y`.
    pub mixed: Vec<Vec<f64>>,
    /// `e^{−2φ} R̃^h(X,U)V`, indexed `(x·v + u)·v + w`.
    pub horizontal_part: Vec<Vec<f64>>,
    /// `R̃^v(U,V)X`, indexed `(u·v + w)·h + x`.
    pub vertical_part: Vec<Vec<f64>>,
}

pub fn curvature_families(d: &WarpPointData) -> CurvatureFamilies {
    let (nv, nh, n) = (d.v_dim, d.h_dim, d.n());
    let r = &d.curvature;
    let hid = |x: usize| nv + x;
    let hess = |i: usize, j: usize| d.hess[(i, j)];
    // S_X U as a full frame vector
    let shape_vec = |x: usize, u: usize| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for k in 0..nv {
            out[k] = d.shape[x][(k, u)];
        }
        out
    };

    let mut horizontal = Vec::with_capacity(nh.pow(4));
    for x in 0..nh {
        for y in 0..nh {
            for z in 0..nh {
                for w in 0..nh {
                    horizontal.push(r.get(hid(x), hid(y), hid(z), hid(w)));
                }
            }
        }
    }

    let mut mixed = Vec::with_capacity(nh * nv * nh);
    for x in 0..nh {
        for u in 0..nv {
            for y in 0..nh {
                let mut out: Vec<f64> = (0..n).map(|l| r.get(hid(x), u, hid(y), l)).collect();
                axpy(&mut out, -d.grad[hid(x)], &shape_vec(y, u));
                axpy(&mut out, -d.grad[hid(y)], &shape_vec(x, u));
                out[u] += hess(hid(x), hid(y)) + d.grad[hid(x)] * d.grad[hid(y)];
                mixed.push(out);
            }
        }
    }

    let mut horizontal_part = Vec::with_capacity(nh * nv * nv);
    for x in 0..nh {
        for u in 0..nv {
            for w in 0..nv {
                let uw = if u == w { 1.0 } else { 0.0 };
                let out: Vec<f64> = (0..nh)
                    .map(|y| {
                        let sig = d.sigma[y][(u, w)];
                        r.get(hid(x), u, w, hid(y)) + d.grad[hid(x)] * sig + d.sigma[x][(u, w)] * d.grad[hid(y)]
                            - uw * (hess(hid(x), hid(y)) + d.grad[hid(x)] * d.grad[hid(y)])
                    })
                    .collect();
                horizontal_part.push(out);
            }
        }
    }

    let mut vertical_part = Vec::with_capacity(nv * nv * nh);
    for u in 0..nv {
        for w in 0..nv {
            for x in 0..nh {
                let mut out: Vec<f64> = (0..nv).map(|k| r.get(u, w, hid(x), k)).collect();
                for k in 0..nv {
                    out[k] += -d.grad[u] * d.shape[x][(k, w)] + d.grad[w] * d.shape[x][(k, u)];
                }
                out[w] += hess(u, hid(x));
                out[u] -= hess(w, hid(x));
                vertical_part.push(out);
            }
        }
    }

    CurvatureFamilies {
        v_dim: nv,
        h_dim: nh,
        horizontal,
        mixed,
        horizontal_part,
        vertical_part,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssemblyDiagnostics {
    /// Largest undeformed component with exactly one vertical index; zero for
    /// integrable submersions.
    pub one_vertical_ambient: f64,
    /// Disagreement between the two families that both determine the
    /// components with two vertical indices.
    pub family_cross_check: f64,
}

/// Full `R̃` in the deformed orthonormal frame, for one-dimensional fibers.
pub fn deformed_curvature(d: &WarpPointData) -> Result<CurvatureTensor> {
    deformed_curvature_with_diagnostics(d).map(|(r, _)| r)
}

pub fn deformed_curvature_with_diagnostics(d: &WarpPointData) -> Result<(CurvatureTensor, AssemblyDiagnostics)> {
    if d.v_dim != 1 {
        return Err(Error::UnsupportedAssembly { v_dim: d.v_dim });
    }
    let n = d.n();
    let nh = d.h_dim;
    let fam = curvature_families(d);
    let e = d.phi_value.exp();
    let r = &d.curvature;

    // A(X,Y) = R̃(X,Ṽ,Y,Ṽ) from the mixed family, B from the horizontal-part family
    let a = |x: usize, y: usize| fam.mixed[x * nh + y][0];
    let mut cross: f64 = 0.0;
    for x in 0..nh {
        for y in 0..nh {
            let b = fam.horizontal_part[x][y];
            cross = cross.max((a(x, y) + b).abs());
        }
    }

    let mut one_vertical: f64 = 0.0;
    let out = CurvatureTensor::from_fn(n, |i, j, k, l| {
        let idx = [i, j, k, l];
        let nv = idx.iter().filter(|&&q| q == 0).count();
        match nv {
            0 => r.get(i, j, k, l),
            1 => e * r.get(i, j, k, l),
            2 => {
                let first = (i == 0) as u8 + (j == 0) as u8;
                if first != 1 {
                    return 0.0;
                }
                let (x, s1) = if i == 0 { (j, -1.0) } else { (i, 1.0) };
                let (y, s2) = if l == 0 { (k, 1.0) } else { (l, -1.0) };
                s1 * s2 * a(x - 1, y - 1)
            }
            _ => 0.0,
        }
    });
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    if [i, j, k, l].iter().filter(|&&q| q == 0).count() == 1 {
                        one_vertical = one_vertical.max(r.get(i, j, k, l).abs());
                    }
                }
            }
        }
    }
    Ok((
        out.with_point(&d.point),
        AssemblyDiagnostics {
            one_vertical_ambient: one_vertical,
            family_cross_check: cross,
        },
    ))
}

/// What is known about `∇φ` a priori.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GradientConstraint {
    Vertical,
    Unconstrained,
}

type DataFn = dyn Fn(&[f64]) -> Result<WarpPointData> + Send + Sync;

/// A base model together with a deformation function, through its pointwise
/// warp data.
#[derive(Clone)]
pub struct DeformedMetricSpec {
    pub base: String,
    pub constraint: GradientConstraint,
    data: Arc<DataFn>,
}

impl fmt::Debug for DeformedMetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DeformedMetricSpec")
            .field("base", &self.base)
            .field("constraint", &self.constraint)
            .finish()
    }
}

impl DeformedMetricSpec {
    pub fn new<F>(base: impl Into<String>, constraint: GradientConstraint, data: F) -> Self
    where
        F: Fn(&[f64]) -> Result<WarpPointData> + Send + Sync + 'static,
    {
        DeformedMetricSpec {
            base: base.into(),
            constraint,
            data: Arc::new(data),
        }
    }

    pub fn data(&self, point: &[f64]) -> Result<WarpPointData> {
        (self.data)(point)
    }

    /// Largest horizontal derivative of `φ` over the points, when the
    /// gradient is declared vertical.
    pub fn constraint_residual(&self, points: &[Vec<f64>]) -> Result<f64> {
        if self.constraint == GradientConstraint::Unconstrained {
            return Ok(0.0);
        }
        let mut worst: f64 = 0.0;
        for p in points {
            let d = self.data(p)?;
            worst = d.grad_h().iter().fold(worst, |m, g| m.max(g.abs()));
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreconditionCheck {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub holds: bool,
}

impl PreconditionCheck {
    fn new(name: &str, value: f64, tol: f64) -> Self {
        PreconditionCheck {
            name: name.into(),
            value,
            tol,
            holds: value <= tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WarpNullityReport {
    /// Largest defect of `z` in the deformed nullity equation.
    pub residual: f64,
    /// Same defect for the undeformed metric.
    pub undeformed_residual: f64,
    pub preconditions: Vec<PreconditionCheck>,
    pub preconditions_hold: bool,
}

pub const GRADIENT_TOL: f64 = 1e-12;
pub const BASE_NULLITY_TOL: f64 = 1e-9;
pub const KERNEL_TOL: f64 = 1e-10;
pub const UMBILIC_TOL: f64 = 1e-10;

fn pointwise(
    model: &DeformedMetricSpec,
    points: &[Vec<f64>],
    exec: Execution,
    z: &[f64],
    kappa: f64,
) -> Result<Vec<(WarpPointData, f64, f64)>> {
    par::try_map(exec, points, |p| {
        let d = model.data(p)?;
        if z.len() != d.n() {
            return Err(Error::Shape("nullity candidate has the wrong length".into()));
        }
        let deformed = deformed_curvature(&d)?;
        let res = nullity::nullity_defect(&deformed, z, kappa);
        let base = nullity::nullity_defect(&d.curvature, z, kappa);
        Ok((d, res, base))
    })
}

fn horizontal_check(d: &WarpPointData, z: &[f64]) -> f64 {
    z[..d.v_dim].iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Horizontal vectors in the κ-nullity of the undeformed metric stay in the
/// κ-nullity after warping, when fibers are umbilic and `∇φ` is vertical.
pub fn check_nullity_warp_i(
    model: &DeformedMetricSpec,
    points: &[Vec<f64>],
    z: &[f64],
    kappa: f64,
    exec: Execution,
) -> Result<WarpNullityReport> {
    let rows = pointwise(model, points, exec, z, kappa)?;
    let mut umb: f64 = 0.0;
    let mut grad: f64 = 0.0;
    let mut hor: f64 = 0.0;
    let (mut res, mut base): (f64, f64) = (0.0, 0.0);
    for (d, r, b) in &rows {
        umb = umb.max(d.umbilicity_residual());
        grad = d.grad_h().iter().fold(grad, |m, g| m.max(g.abs()));
        hor = hor.max(horizontal_check(d, z));
        res = res.max(*r);
        base = base.max(*b);
    }
    let preconditions = vec![
        PreconditionCheck::new("candidate horizontal", hor, 0.0),
        PreconditionCheck::new("fibers umbilic", umb, UMBILIC_TOL),
        PreconditionCheck::new("gradient vertical", grad, GRADIENT_TOL),
        PreconditionCheck::new("candidate in undeformed nullity", base, BASE_NULLITY_TOL),
    ];
    Ok(finish(res, base, preconditions))
}

/// Horizontal lifts of 0-nullity vectors of the base lying in
/// `ker dφ ∩ ker (Hess_φ)^h` stay in the 0-nullity, when `S ≡ 0`.
pub fn check_nullity_warp_ii(
    model: &DeformedMetricSpec,
    points: &[Vec<f64>],
    z: &[f64],
    exec: Execution,
) -> Result<WarpNullityReport> {
    let rows = pointwise(model, points, exec, z, 0.0)?;
    let mut shape: f64 = 0.0;
    let mut dphi: f64 = 0.0;
    let mut hess: f64 = 0.0;
    let mut hor: f64 = 0.0;
    let (mut res, mut base): (f64, f64) = (0.0, 0.0);
    for (d, r, b) in &rows {
        shape = shape.max(d.shape_norm());
        hor = hor.max(horizontal_check(d, z));
        dphi = dphi.max(dot(z, &d.grad).abs());
        for y in d.v_dim..d.n() {
            let h: f64 = (0..d.n()).map(|i| z[i] * d.hess[(i, y)]).sum();
            hess = hess.max(h.abs());
        }
        res = res.max(*r);
        base = base.max(*b);
    }
    let preconditions = vec![
        PreconditionCheck::new("candidate horizontal", hor, 0.0),
        PreconditionCheck::new("shape operator vanishes", shape, KERNEL_TOL),
        PreconditionCheck::new("candidate in base 0-nullity", base, BASE_NULLITY_TOL),
        PreconditionCheck::new("candidate in ker dφ", dphi, KERNEL_TOL),
        PreconditionCheck::new("candidate in horizontal Hessian kernel", hess, KERNEL_TOL),
    ];
    Ok(finish(res, base, preconditions))
}

fn finish(residual: f64, undeformed_residual: f64, preconditions: Vec<PreconditionCheck>) -> WarpNullityReport {
    let preconditions_hold = preconditions.iter().all(|p| p.holds);
    WarpNullityReport {
        residual,
        undeformed_residual,
        preconditions,
        preconditions_hold,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}
