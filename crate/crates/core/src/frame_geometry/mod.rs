//! Moving-frame curvature engine.
//!
//! An [`OrthoFrame`] gives `n` vector fields on an `n`-dimensional chart,
//! declared orthonormal for the metric under study. Everything else follows
//! from the chart components of those fields:
//!
//! * structure functions `c_{ijk} = ⟨[E_i,E_j], E_k⟩`,
//! * the Levi-Civita table `Γ_{ijk} = ⟨∇_{E_i}E_j, E_k⟩ = ½(c_{ijk} − c_{jki} + c_{kij})`,
//! * the curvature `R_{ijkl}`, whose frame derivatives of `Γ` come from jets.
//!
//! The metric never appears explicitly: it is the one making the frame
//! orthonormal.

mod tensor;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

pub use tensor::{pairs, sym_eigenvalues, CurvatureTensor, SymmetryResiduals};

use crate::error::{Error, Result};
use crate::jets::{invert_jet_matrix, Jet, ScalarField};
use crate::par::{self, Execution};

type FrameFn = dyn Fn(&[Jet]) -> Result<Vec<Vec<Jet>>> + Send + Sync;

/// `n` vector fields on an `n`-dimensional chart, given by their chart
/// components `E_i = Σ_a E_i^a ∂_a`.
#[derive(Clone)]
pub struct OrthoFrame {
    dim: usize,
    labels: Vec<String>,
    components: Arc<FrameFn>,
}

impl fmt::Debug for OrthoFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OrthoFrame({:?})", self.labels)
    }
}

impl OrthoFrame {
    /// `components(x)[i][a]` must return the jet of `E_i^a` given coordinate
    /// jets `x`.
    pub fn new<F>(labels: Vec<String>, components: F) -> Self
    where
        F: Fn(&[Jet]) -> Result<Vec<Vec<Jet>>> + Send + Sync + 'static,
    {
        OrthoFrame {
            dim: labels.len(),
            labels,
            components: Arc::new(components),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn jets(&self, point: &[f64], order: usize) -> Result<FrameJets> {
        if point.len() != self.dim {
            return Err(Error::Shape(format!(
                "frame of dimension {} evaluated at a {}-point",
                self.dim,
                point.len()
            )));
        }
        let vars = Jet::variables(point, order)?;
        let fields = (self.components)(&vars)?;
        if fields.len() != self.dim || fields.iter().any(|f| f.len() != self.dim) {
            return Err(Error::Shape("frame components have the wrong shape".into()));
        }
        Ok(FrameJets {
            n: self.dim,
            order,
            fields,
        })
    }

    /// Frame matrix at a point, column `i` = chart components of `E_i`.
    pub fn matrix_at(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        let fj = self.jets(point, 0)?;
        Ok(DMatrix::from_fn(self.dim, self.dim, |a, i| fj.fields[i][a].value()))
    }

    /// 2-norm condition number of the frame matrix.
    pub fn condition_number(&self, point: &[f64]) -> Result<f64> {
        let sv = self.matrix_at(point)?.singular_values();
        let max = sv.max();
        let min = sv.min();
        Ok(if min == 0.0 { f64::INFINITY } else { max / min })
    }

    /// Rescale each field by a scalar function: `E_i ↦ s_i E_i`.
    pub fn scaled(&self, labels: Vec<String>, factors: Vec<Option<ScalarField>>) -> OrthoFrame {
        let base = self.components.clone();
        OrthoFrame::new(labels, move |x| {
            let mut fields = base(x)?;
            for (field, factor) in fields.iter_mut().zip(&factors) {
                if let Some(s) = factor {
                    let s = s.eval_vars(x)?;
                    for c in field.iter_mut() {
                        *c = &*c * &s;
                    }
                }
            }
            Ok(fields)
        })
    }
}

/// Frame component jets at one point.
#[derive(Debug, Clone)]
pub struct FrameJets {
    pub n: usize,
    pub order: usize,
    /// `fields[i][a]` is the jet of `E_i^a`.
    pub fields: Vec<Vec<Jet>>,
}

impl FrameJets {
    /// `E_i(g) = Σ_a E_i^a ∂_a g`, one order lower than `g`.
    pub fn derive(&self, i: usize, g: &Jet) -> Result<Jet> {
        if g.order() == 0 {
            return Err(Error::OrderExhausted {
                required: 1,
                available: 0,
            });
        }
        let target = g.order() - 1;
        if target > self.order {
            return Err(Error::OrderExhausted {
                required: target,
                available: self.order,
            });
        }
        let mut out = Jet::zeros(g.nvars(), target)?;
        for a in 0..self.n {
            let comp = self.fields[i][a].truncate(target);
            if comp.max_abs() == 0.0 {
                continue;
            }
            out.add_product(&comp, &g.derivative(a)?);
        }
        Ok(out)
    }

    pub fn truncate(&self, order: usize) -> FrameJets {
        FrameJets {
            n: self.n,
            order: order.min(self.order),
            fields: self
                .fields
                .iter()
                .map(|f| f.iter().map(|c| c.truncate(order)).collect())
                .collect(),
        }
    }
}

/// `Γ_{ijk} = ⟨∇_{E_i}E_j, E_k⟩` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionTable {
    pub n: usize,
    values: Vec<f64>,
}

impl ConnectionTable {
    pub fn zero(n: usize) -> Self {
        ConnectionTable {
            n,
            values: vec![0.0; n * n * n],
        }
    }

    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n * n {
            return Err(Error::Shape(format!("connection table needs {} entries", n * n * n)));
        }
        Ok(ConnectionTable { n, values })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(i * self.n + j) * self.n + k]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let n = self.n;
        self.values[(i * n + j) * n + k] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Frame components of `∇_a b` for constant-coefficient combinations of the
    /// frame fields.
    pub fn covariant(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                let w = a[i] * b[j];
                if w == 0.0 {
                    continue;
                }
                for (k, o) in out.iter_mut().enumerate() {
                    *o += w * self.get(i, j, k);
                }
            }
        }
        out
    }

    /// `max |Γ_{ijk} + Γ_{ikj}|`.
    pub fn metric_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst = worst.max((self.get(i, j, k) + self.get(i, k, j)).abs());
                }
            }
        }
        worst
    }

    /// `max |Γ_{ijk} − Γ_{jik} − c_{ijk}|`.
    pub fn torsion_residual(&self, structure: &[f64]) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let c = structure[(i * n + j) * n + k];
                    worst = worst.max((self.get(i, j, k) - self.get(j, i, k) - c).abs());
                }
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &ConnectionTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Koszul formula for an orthonormal frame.
    pub fn from_structure(n: usize, c: &[f64]) -> Self {
        let cc = |i: usize, j: usize, k: usize| c[(i * n + j) * n + k];
        let mut t = ConnectionTable::zero(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    t.set(i, j, k, 0.5 * (cc(i, j, k) - cc(j, k, i) + cc(k, i, j)));
                }
            }
        }
        t
    }
}

/// Jets of the structure functions and Levi-Civita connection at a point.
#[derive(Debug, Clone)]
pub struct LeviCivita {
    pub frame: FrameJets,
    /// `c_{ijk}`, flattened `(i·n + j)·n + k`.
    pub structure: Vec<Jet>,
    /// `Γ_{ijk}`, same layout.
    pub gamma: Vec<Jet>,
    pub point: Vec<f64>,
}

/// Structure functions and connection of `frame` at `point`, as jets of
/// `order` (the frame itself is expanded one order higher).
pub fn levi_civita(frame: &OrthoFrame, point: &[f64], order: usize) -> Result<LeviCivita> {
    let n = frame.dim();
    let fj = frame.jets(point, order + 1)?;

    let fmat: Vec<Vec<Jet>> = (0..n)
        .map(|a| (0..n).map(|i| fj.fields[i][a].truncate(order)).collect())
        .collect();
    let inv = invert_jet_matrix(&fmat).map_err(|e| match e {
        Error::Geometry(_) => Error::Geometry(format!(
            "singular frame matrix at {point:?} (condition number {:e})",
            frame.condition_number(point).unwrap_or(f64::INFINITY)
        )),
        other => other,
    })?;

    // E_i(E_j^a) for every i, j, a
    let mut derived = vec![vec![Vec::with_capacity(n); n]; n];
    for i in 0..n {
        for j in 0..n {
            for a in 0..n {
                derived[i][j].push(fj.derive(i, &fj.fields[j][a])?);
            }
        }
    }

    let zero = Jet::zeros(n, order)?;
    let mut structure = vec![zero.clone(); n * n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let bracket: Vec<Jet> = (0..n).map(|a| &derived[i][j][a] - &derived[j][i][a]).collect();
            for k in 0..n {
                let s = &mut structure[(i * n + j) * n + k];
                for a in 0..n {
                    s.add_product(&inv[k][a], &bracket[a]);
                }
            }
        }
    }

    let c = |i: usize, j: usize, k: usize| &structure[(i * n + j) * n + k];
    let mut gamma = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut g = c(i, j, k) - c(j, k, i);
                g += c(k, i, j);
                gamma.push(g * 0.5);
            }
        }
    }

    Ok(LeviCivita {
        frame: fj,
        structure,
        gamma,
        point: point.to_vec(),
    })
}

impl LeviCivita {
    pub fn n(&self) -> usize {
        self.frame.n
    }

    pub fn order(&self) -> usize {
        self.gamma[0].order()
    }

    pub fn table(&self) -> ConnectionTable {
        ConnectionTable {
            n: self.n(),
            values: self.gamma.iter().map(Jet::value).collect(),
        }
    }

    pub fn structure_values(&self) -> Vec<f64> {
        self.structure.iter().map(Jet::value).collect()
    }

    /// Curvature components as jets, one order below the connection.
    pub fn curvature_jets(&self, exec: Execution) -> Result<Vec<Jet>> {
        curvature_jets_from(&self.frame, &self.structure, &self.gamma, exec)
    }

    pub fn curvature(&self) -> Result<CurvatureTensor> {
        let jets = self.curvature_jets(Execution::Sequential)?;
        Ok(CurvatureTensor::from_components(self.n(), jets.iter().map(Jet::value).collect())?
            .with_point(&self.point))
    }
}

/// `R_{ijkl} = E_i(Γ_{jkl}) − E_j(Γ_{ikl}) + Σ_m (Γ_{jkm}Γ_{iml} − Γ_{ikm}Γ_{jml}) − Σ_m c_{ijm}Γ_{mkl}`.
pub fn curvature_jets_from(
    frame: &FrameJets,
    structure: &[Jet],
    gamma: &[Jet],
    exec: Execution,
) -> Result<Vec<Jet>> {
    let n = frame.n;
    let order = gamma[0].order();
    if order == 0 {
        return Err(Error::OrderExhausted {
            required: 1,
            available: 0,
        });
    }
    let r_order = order - 1;
    let g: Vec<Jet> = gamma.iter().map(|j| j.truncate(r_order)).collect();
    let c: Vec<Jet> = structure.iter().map(|j| j.truncate(r_order)).collect();
    let gi = |i: usize, j: usize, k: usize| &g[(i * n + j) * n + k];

    // dgamma[i][jkl] = E_i(Γ_jkl)
    let dgamma: Vec<Vec<Jet>> = par::try_map_range(exec, n, |i| {
        gamma.iter().map(|gj| frame.derive(i, gj)).collect::<Result<Vec<_>>>()
    })?;

    let comps = par::map_range(exec, n * n, |ij| {
        let (i, j) = (ij / n, ij % n);
        let mut block = Vec::with_capacity(n * n);
        for k in 0..n {
            for l in 0..n {
                if i == j {
                    block.push(g[0].constant_like(0.0));
                    continue;
                }
                let mut r = &dgamma[i][(j * n + k) * n + l] - &dgamma[j][(i * n + k) * n + l];
                for m in 0..n {
                    r.add_product(gi(j, k, m), gi(i, m, l));
                    let t = gi(i, k, m) * gi(j, m, l);
                    r -= &t;
                    let t = &c[(i * n + j) * n + m] * gi(m, k, l);
                    r -= &t;
                }
                block.push(r);
            }
        }
        block
    });
    Ok(comps.into_iter().flatten().collect())
}

/// Curvature of `frame` at `point`.
pub fn curvature_at(frame: &OrthoFrame, point: &[f64]) -> Result<CurvatureTensor> {
    levi_civita(frame, point, 1)?.curvature()
}

/// Connection and curvature of a left-invariant metric, from the structure
/// constants of an orthonormal basis of the Lie algebra.
pub fn left_invariant(n: usize, structure: &[f64]) -> (ConnectionTable, CurvatureTensor) {
    let conn = ConnectionTable::from_structure(n, structure);
    let c = |i: usize, j: usize, k: usize| structure[(i * n + j) * n + k];
    let r = CurvatureTensor::from_fn(n, |i, j, k, l| {
        (0..n)
            .map(|m| {
                conn.get(j, k, m) * conn.get(i, m, l) - conn.get(i, k, m) * conn.get(j, m, l)
                    - c(i, j, m) * conn.get(m, k, l)
            })
            .sum()
    });
    (conn, r)
}

/// Structure constants `c_{ijk}` from a bracket table `[E_i, E_j] = Σ_k b[i][j][k] E_k`
/// given for `i < j`.
pub fn structure_from_brackets(n: usize, brackets: &[(usize, usize, Vec<f64>)]) -> Vec<f64> {
    let mut c = vec![0.0; n * n * n];
    for (i, j, v) in brackets {
        for k in 0..n {
            c[(i * n + j) * n + k] = v[k];
            c[(j * n + i) * n + k] = -v[k];
        }
    }
    c
}
