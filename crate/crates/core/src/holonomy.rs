//! Infinitesimal holonomy of the deformed almost-abelian metrics at the
//! basepoint: iterated covariant differentials of curvature over jets, then
//! Lie closure in `𝔰𝔬(n)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame_geometry::{levi_civita, pairs, FrameJets};
use crate::jets::Jet;
use crate::models::{AlmostAbelianModel, AlmostAbelianSpec, ChartModel};
use crate::par::{self, Execution};

/// Frame components of a tensor field near a point, as jets. Slot order is
/// `(w_k, …, w_1, a_1, …)`: derivative slots in front, newest first.
#[derive(Debug, Clone)]
pub struct CovDerivTensorJet {
    /// Number of covariant derivatives taken.
    pub k: usize,
    pub n: usize,
    pub rank: usize,
    pub components: Vec<Jet>,
}

impl CovDerivTensorJet {
    pub fn new(n: usize, rank: usize, components: Vec<Jet>) -> Result<Self> {
        if components.len() != n.pow(rank as u32) {
            return Err(Error::Shape(format!(
                "rank-{rank} tensor in dimension {n} needs {} components",
                n.pow(rank as u32)
            )));
        }
        Ok(CovDerivTensorJet {
            k: 0,
            n,
            rank,
            components,
        })
    }

    pub fn jet_order(&self) -> usize {
        self.components[0].order()
    }

    pub fn value(&self, idx: &[usize]) -> f64 {
        self.components[self.flat(idx)].value()
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Fix the first slot to frame index `w`.
    pub fn fix_first(&self, w: usize) -> CovDerivTensorJet {
        let block = self.n.pow(self.rank as u32 - 1);
        CovDerivTensorJet {
            k: self.k,
            n: self.n,
            rank: self.rank - 1,
            components: self.components[w * block..(w + 1) * block].to_vec(),
        }
    }

    /// The endomorphism `c ↦ S(…, a, b, c, ·)` at the point, for the leading
    /// slots `lead` (all but the last two), as a matrix `M[l][c]`.
    pub fn endomorphism(&self, lead: &[usize]) -> DMatrix<f64> {
        let n = self.n;
        let mut idx = lead.to_vec();
        idx.extend([0, 0]);
        let r = idx.len();
        DMatrix::from_fn(n, n, |l, c| {
            idx[r - 2] = c;
            idx[r - 1] = l;
            self.value(&idx)
        })
    }

    /// Largest component at the point.
    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0, |m, j| m.max(j.value().abs()))
    }
}

/// `(∇S)(w; a_1..a_r) = E_w(S_{a_1..a_r}) − Σ_s Σ_m Γ_{w a_s m} S(.., m, ..)`.
pub fn covariant_differential(
    s: &CovDerivTensorJet,
    frame: &FrameJets,
    gamma: &[Jet],
    exec: Execution,
) -> Result<CovDerivTensorJet> {
    let n = s.n;
    if s.jet_order() == 0 {
        return Err(Error::OrderExhausted {
            required: s.k + 1,
            available: s.k,
        });
    }
    let target = s.jet_order() - 1;
    let g: Vec<Jet> = gamma.iter().map(|j| j.truncate(target)).collect();
    let low: Vec<Jet> = s.components.iter().map(|j| j.truncate(target)).collect();
    let r = s.rank;
    let size = n.pow(r as u32);
    let strides: Vec<usize> = (0..r).map(|q| n.pow((r - 1 - q) as u32)).collect();
    let blocks = par::try_map_range(exec, n, |w| -> Result<Vec<Jet>> {
        let mut out = Vec::with_capacity(size);
        for idx in 0..size {
            let mut v = frame.derive(w, &s.components[idx])?;
            for &stride in &strides {
                let aq = (idx / stride) % n;
                let base = idx - aq * stride;
                for m in 0..n {
                    let gm = &g[(w * n + aq) * n + m];
                    if gm.max_abs() == 0.0 {
                        continue;
                    }
                    let t = gm * &low[base + m * stride];
                    v -= &t;
                }
            }
            out.push(v);
        }
        Ok(out)
    })?;
    Ok(CovDerivTensorJet {
        k: s.k + 1,
        n,
        rank: r + 1,
        components: blocks.into_iter().flatten().collect(),
    })
}

/// Which connection feeds the covariant differentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum ConnectionSource {
    /// Closed-form table of the deformed connection.
    #[default]
    Table,
    /// Levi-Civita connection of the frame, from the moving-frame engine.
    FrameEngine,
}

/// Jets at the basepoint sufficient for `max_order` covariant derivatives.
pub struct BasepointJets {
    pub frame: FrameJets,
    pub gamma: Vec<Jet>,
    pub curvature: CovDerivTensorJet,
    pub n: usize,
}

impl BasepointJets {
    pub fn new(model: &AlmostAbelianModel, max_order: usize, source: ConnectionSource, exec: Execution) -> Result<Self> {
        let p = model.basepoint();
        let lc = levi_civita(model.frame(), &p, max_order + 1)?;
        let n = lc.n();
        let r = lc.curvature_jets(exec)?;
        let gamma = match source {
            ConnectionSource::Table => model.table_connection_jets(&p, max_order + 1)?,
            ConnectionSource::FrameEngine => lc.gamma.clone(),
        };
        Ok(BasepointJets {
            frame: lc.frame,
            gamma,
            curvature: CovDerivTensorJet::new(n, 4, r)?,
            n,
        })
    }

    /// `∇^k R` for `k = 0..=max`.
    pub fn full_differentials(&self, max: usize, exec: Execution) -> Result<Vec<CovDerivTensorJet>> {
        let mut out = vec![self.curvature.clone()];
        for _ in 0..max {
            let next = covariant_differential(out.last().unwrap(), &self.frame, &self.gamma, exec)?;
            out.push(next);
        }
        Ok(out)
    }

    /// `B_0 = R`, `B_{k+1} = ∇_ξ̃ B_k`, as tensor fields.
    pub fn xi_iterates(&self, max: usize, exec: Execution) -> Result<Vec<CovDerivTensorJet>> {
        let mut out = vec![self.curvature.clone()];
        for k in 0..max {
            let d = covariant_differential(&out[k], &self.frame, &self.gamma, exec)?;
            let mut b = d.fix_first(0);
            b.k = k + 1;
            out.push(b);
        }
        Ok(out)
    }
}

/// `u∧v ↦ ⟨u,·⟩v − ⟨v,·⟩u`, i.e. the matrix `v uᵀ − u vᵀ`.
pub fn wedge(u: &[f64], v: &[f64]) -> DMatrix<f64> {
    let u = DVector::from_column_slice(u);
    let v = DVector::from_column_slice(v);
    &v * u.transpose() - &u * v.transpose()
}

fn bracket(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

pub const CLOSURE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct HolonomyAlgebra {
    #[serde(skip)]
    pub generators: Vec<DMatrix<f64>>,
    /// Frobenius-orthonormal basis.
    #[serde(skip)]
    pub basis: Vec<DMatrix<f64>>,
    pub dim: usize,
    pub generator_count: usize,
    /// Largest `|M + Mᵀ|` over the basis.
    pub skew_residual: f64,
    /// Largest distance of a bracket of basis elements from the span.
    pub closure_residual: f64,
}

impl HolonomyAlgebra {
    /// Lie algebra generated by `generators`.
    pub fn generated_by(generators: Vec<DMatrix<f64>>) -> Self {
        let mut basis: Vec<DMatrix<f64>> = Vec::new();
        let scale = generators.iter().fold(0.0f64, |m, g| m.max(g.norm()));
        for g in &generators {
            push_if_new(&mut basis, g.clone(), scale);
        }
        loop {
            let before = basis.len();
            let mut i = 0;
            while i < basis.len() {
                for j in 0..i {
                    let b = bracket(&basis[i], &basis[j]);
                    push_if_new(&mut basis, b, 1.0);
                }
                i += 1;
            }
            if basis.len() == before {
                break;
            }
        }
        let skew_residual = basis.iter().fold(0.0f64, |m, b| m.max((b + b.transpose()).amax()));
        let mut closure_residual: f64 = 0.0;
        for i in 0..basis.len() {
            for j in 0..i {
                let b = bracket(&basis[i], &basis[j]);
                closure_residual = closure_residual.max(span_residual(&basis, &b));
            }
        }
        HolonomyAlgebra {
            generator_count: generators.len(),
            dim: basis.len(),
            generators,
            basis,
            skew_residual,
            closure_residual,
        }
    }

    /// Distance of `m` from the span, relative to `|m|`.
    pub fn contains(&self, m: &DMatrix<f64>) -> bool {
        let nrm = m.norm();
        nrm == 0.0 || span_residual(&self.basis, m) <= CLOSURE_TOL * nrm
    }
}

fn project_out(basis: &[DMatrix<f64>], m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut r = m.clone();
    // two passes of modified Gram–Schmidt
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&r);
            r -= b * c;
        }
    }
    r
}

fn span_residual(basis: &[DMatrix<f64>], m: &DMatrix<f64>) -> f64 {
    project_out(basis, m).norm()
}

/// Adds the part of `m` orthogonal to the basis when it exceeds
/// `CLOSURE_TOL · scale`.
fn push_if_new(basis: &mut Vec<DMatrix<f64>>, m: DMatrix<f64>, scale: f64) {
    let r = project_out(basis, &m);
    let rn = r.norm();
    if rn > CLOSURE_TOL * scale {
        basis.push(r / rn);
    }
}

/// Skew endomorphisms `c ↦ S(w…, a, b, c, ·)` for all leading indices and
/// `a < b`.
pub fn generators_of(s: &CovDerivTensorJet) -> Vec<DMatrix<f64>> {
    let n = s.n;
    let lead_slots = s.rank - 4;
    let mut out = Vec::new();
    for w in 0..n.pow(lead_slots as u32) {
        let mut lead: Vec<usize> = (0..lead_slots).map(|q| (w / n.pow((lead_slots - 1 - q) as u32)) % n).collect();
        for (a, b) in pairs(n) {
            lead.truncate(lead_slots);
            lead.extend([a, b]);
            out.push(s.endomorphism(&lead));
        }
    }
    out
}

/// `B_k(ξ̃, z)` for a frame vector `z ∈ V`, as a matrix.
fn iterate_on(b: &CovDerivTensorJet, x: &[f64], y: &[f64]) -> DMatrix<f64> {
    let n = b.n;
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let w = x[i] * y[j];
            if w != 0.0 {
                out += b.endomorphism(&[i, j]) * w;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct HolonomyReport {
    pub max_order: usize,
    pub source: ConnectionSource,
    /// Dimension of the algebra generated by all `∇^k R(w…; a, b)`, `k ≤ max_order`.
    pub dim: usize,
    /// Dimension of the algebra generated by `∇^k_ξ̃ R(ξ̃, Z)` alone.
    pub dim_xi_z: usize,
    /// `dims_by_order[k]`: all generators up to order `k`.
    pub dims_by_order: Vec<usize>,
    pub dims_xi_z_by_order: Vec<usize>,
    /// First order from which `dims_by_order` no longer changes.
    pub stabilized_at: usize,
    /// `flag_containment[k]`: the `∇^j_ξ̃ R(ξ̃, Z)`, `j ≤ k`, generate an algebra
    /// containing `𝔰𝔬(V̂_k)`.
    pub flag_containment: Vec<bool>,
    pub algebra: HolonomyAlgebra,
    pub cyclicity: CyclicityReport,
}

/// `T^k Z` for `T = dρ(ξ̃)` at the basepoint, in frame components.
fn krylov_frame_vectors(spec: &AlmostAbelianSpec, count: usize) -> Vec<Vec<f64>> {
    let f0 = spec.c1 + spec.c2;
    let t = spec.d_rho() / f0;
    let mut v = spec.z_vec();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut e = vec![0.0];
        e.extend(v.iter());
        out.push(e);
        v = &t * v;
    }
    out
}

fn xi_hat(n: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[0] = 1.0;
    e
}

pub fn infinitesimal_holonomy(
    model: &AlmostAbelianModel,
    max_order: usize,
    source: ConnectionSource,
    exec: Execution,
) -> Result<HolonomyReport> {
    if !model.deformed {
        return Err(Error::Geometry("holonomy is computed for the deformed metric".into()));
    }
    let jets = BasepointJets::new(model, max_order, source, exec)?;
    let n = jets.n;
    let full = jets.full_differentials(max_order, exec)?;
    let iterates = jets.xi_iterates(max_order, exec)?;
    let xi = xi_hat(n);
    let z = krylov_frame_vectors(&model.spec, 1).remove(0);

    let mut all = Vec::new();
    let mut xz = Vec::new();
    let mut dims_by_order = Vec::new();
    let mut dims_xi_z_by_order = Vec::new();
    let mut flag_containment = Vec::new();
    let flags = krylov_frame_vectors(&model.spec, max_order + 1);
    let mut algebra = None;
    for k in 0..=max_order {
        all.extend(generators_of(&full[k]));
        xz.push(iterate_on(&iterates[k], &xi, &z));
        let a = HolonomyAlgebra::generated_by(all.clone());
        let b = HolonomyAlgebra::generated_by(xz.clone());
        dims_by_order.push(a.dim);
        dims_xi_z_by_order.push(b.dim);
        let mut span = vec![xi.clone()];
        span.extend(flags[..=k].iter().cloned());
        let onb = crate::nullity::orthonormalize(&span, 1e-9);
        let contained = pairs(onb.len()).into_iter().all(|(i, j)| b.contains(&wedge(&onb[i], &onb[j])));
        flag_containment.push(contained);
        if k == max_order {
            algebra = Some((a, b));
        }
    }
    let (a, b) = algebra.expect("max_order loop runs at least once");
    let last = *dims_by_order.last().unwrap();
    let stabilized_at = dims_by_order.iter().position(|&d| d == last).unwrap_or(0);
    Ok(HolonomyReport {
        max_order,
        source,
        dim: a.dim,
        dim_xi_z: b.dim,
        dims_by_order,
        dims_xi_z_by_order,
        stabilized_at,
        flag_containment,
        algebra: a,
        cyclicity: is_cyclic(&model.spec),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClaimsReport {
    pub k: usize,
    /// `∇^k_ξ̃ R(ξ̃,Z) − a²ξ̃∧T^kZ` outside `⋀²V̂_{k−1}`.
    pub leading: f64,
    /// `∇^k_ξ̃ R(ξ̃,X)` outside `⋀²V̂_{k−1}`, worst `X ∈ Z^⊥`.
    pub transverse: f64,
    /// `∇^k_ξ̃ R(X,Y)` outside `⋀²V̂_{k−1}`, worst `X, Y ∈ V`.
    pub horizontal: f64,
}

impl ClaimsReport {
    pub fn max(&self) -> f64 {
        self.leading.max(self.transverse).max(self.horizontal)
    }
}

/// `|ω − PωP|` with `P` the projector onto the span of `vectors` (none: `P = 0`).
fn outside_wedge(omega: &DMatrix<f64>, vectors: &[Vec<f64>]) -> f64 {
    let n = omega.nrows();
    let onb = crate::nullity::orthonormalize(vectors, 1e-12);
    let p = crate::nullity::projector(n, &onb);
    (omega - &p * omega * &p).amax()
}

/// Leading-term claims for `∇^k_ξ̃ R`, for each `k ≤ max_k`.
pub fn claims_leading_term(
    model: &AlmostAbelianModel,
    max_k: usize,
    source: ConnectionSource,
    exec: Execution,
) -> Result<Vec<ClaimsReport>> {
    let spec = &model.spec;
    let jets = BasepointJets::new(model, max_k, source, exec)?;
    let n = jets.n;
    let iterates = jets.xi_iterates(max_k, exec)?;
    let xi = xi_hat(n);
    let kry = krylov_frame_vectors(spec, max_k + 1);
    let a2 = spec.a * spec.a;
    let z = &kry[0];
    // orthonormal basis of Z^⊥ ∩ V
    let mut cands: Vec<Vec<f64>> = vec![z.clone()];
    cands.extend((1..n).map(|i| {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        e
    }));
    let z_perp: Vec<Vec<f64>> = crate::nullity::orthonormalize(&cands, 1e-12).into_iter().skip(1).collect();
    let v_basis: Vec<Vec<f64>> = (1..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect();

    let mut out = Vec::with_capacity(max_k + 1);
    for (k, b) in iterates.iter().enumerate() {
        let mut lower = Vec::new();
        if k > 0 {
            lower.push(xi.clone());
            lower.extend(kry[..k].iter().cloned());
        }
        let lead = iterate_on(b, &xi, z) - wedge(&xi, &kry[k]) * a2;
        let leading = outside_wedge(&lead, &lower);
        let transverse = z_perp
            .iter()
            .map(|x| outside_wedge(&iterate_on(b, &xi, x), &lower))
            .fold(0.0, f64::max);
        let mut horizontal: f64 = 0.0;
        for (i, j) in pairs(v_basis.len()) {
            horizontal = horizontal.max(outside_wedge(&iterate_on(b, &v_basis[i], &v_basis[j]), &lower));
        }
        out.push(ClaimsReport {
            k,
            leading,
            transverse,
            horizontal,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CyclicityReport {
    pub cyclic: bool,
    /// Pairs of blocks whose weights agree up to sign.
    pub repeated_weights: Vec<(usize, usize)>,
    /// Blocks on which `Z` has no component.
    pub empty_blocks: Vec<usize>,
    pub krylov_rank: usize,
    /// The algebraic test and the Krylov rank agree.
    pub consistent: bool,
}

pub fn is_cyclic(spec: &AlmostAbelianSpec) -> CyclicityReport {
    let blocks = spec.weights.len();
    let mut repeated_weights = Vec::new();
    for i in 0..blocks {
        for j in 0..i {
            if spec.weights[i].abs() == spec.weights[j].abs() {
                repeated_weights.push((j, i));
            }
        }
    }
    let zero_weight = spec.weights.iter().any(|&w| w == 0);
    let empty_blocks: Vec<usize> = (0..blocks)
        .filter(|&k| spec.z[2 * k].powi(2) + spec.z[2 * k + 1].powi(2) <= 1e-24)
        .collect();
    let cyclic = repeated_weights.is_empty() && empty_blocks.is_empty() && !zero_weight;

    let m = spec.m;
    let d = spec.d_rho();
    let mut cols = Vec::with_capacity(m);
    let mut v = spec.z_vec();
    for _ in 0..m {
        let nv = v.norm();
        cols.push(if nv > 0.0 { &v / nv } else { v.clone() });
        v = &d * v;
    }
    let k = DMatrix::from_columns(&cols);
    let sv = k.singular_values();
    let smax = sv.max();
    let krylov_rank = if smax == 0.0 {
        0
    } else {
        sv.iter().filter(|&&s| s > 1e-9 * smax).count()
    };
    CyclicityReport {
        cyclic,
        repeated_weights,
        empty_blocks,
        krylov_rank,
        consistent: cyclic == (krylov_rank == m),
    }
}
