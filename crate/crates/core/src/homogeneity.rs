//! Orthogonal invariants of curvature tensors: curvature homogeneity and
//! "modelled on" checks.
//!
//! Equal invariants are necessary for orthogonal equivalence. For the
//! reference tensors used here, whose curvature operator has rank one, they
//! are also sufficient: the tensor is then `λ·ω⊗ω` for a unit 2-form `ω`,
//! and the Ricci spectrum forces `ω` to be decomposable.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame_geometry::CurvatureTensor;
use crate::models::SL2RModel;

pub const MATCH_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureInvariants {
    pub dim: usize,
    pub scalar: f64,
    /// Ascending.
    pub ricci_spectrum: Vec<f64>,
    /// Ascending, of length `n(n−1)/2`.
    pub operator_spectrum: Vec<f64>,
    pub semi_symmetry_residual: f64,
}

impl CurvatureInvariants {
    /// Largest difference over all invariants.
    pub fn distance(&self, other: &CurvatureInvariants) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::Shape(format!(
                "invariants of dimension {} and {}",
                self.dim, other.dim
            )));
        }
        let lists = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        Ok((self.scalar - other.scalar)
            .abs()
            .max(lists(&self.ricci_spectrum, &other.ricci_spectrum))
            .max(lists(&self.operator_spectrum, &other.operator_spectrum))
            .max((self.semi_symmetry_residual - other.semi_symmetry_residual).abs()))
    }
}

pub fn invariants_of(r: &CurvatureTensor) -> CurvatureInvariants {
    CurvatureInvariants {
        dim: r.dim(),
        scalar: r.scalar(),
        ricci_spectrum: r.ricci_spectrum(),
        operator_spectrum: r.curvature_operator_spectrum(),
        semi_symmetry_residual: r.semi_symmetry_residual(),
    }
}

/// Reference tensors a metric may be modelled on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelReference {
    /// `ℝH²(−a²) × ℝ^{flat_dim}`.
    HyperbolicPlaneTimesFlat { a: f64, flat_dim: usize },
    /// Left-invariant metric on SL(2,ℝ) with orthonormal basis `(X, Y, T)`.
    SL2Left,
}

impl ModelReference {
    pub fn tensor(&self) -> CurvatureTensor {
        match *self {
            ModelReference::HyperbolicPlaneTimesFlat { a, flat_dim } => {
                CurvatureTensor::constant_curvature(2, -a * a).product_with_flat(flat_dim)
            }
            ModelReference::SL2Left => SL2RModel::undeformed_curvature(),
        }
    }

    pub fn invariants(&self) -> CurvatureInvariants {
        invariants_of(&self.tensor())
    }
}

/// Whether all invariants agree with those of `reference` within [`MATCH_TOL`].
pub fn matches_model(inv: &CurvatureInvariants, reference: &ModelReference) -> Result<bool> {
    Ok(inv.distance(&reference.invariants())? <= MATCH_TOL)
}

/// Largest invariant spread over a set of tensors.
pub fn invariant_spread(tensors: &[CurvatureTensor]) -> Result<f64> {
    let Some(first) = tensors.first() else {
        return Ok(0.0);
    };
    let base = invariants_of(first);
    tensors
        .iter()
        .skip(1)
        .try_fold(0.0f64, |m, t| Ok(m.max(base.distance(&invariants_of(t))?)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyperbolic_product_invariants() {
        let inv = ModelReference::HyperbolicPlaneTimesFlat { a: 1.0, flat_dim: 3 }.invariants();
        assert!((inv.scalar + 2.0).abs() < 1e-12);
        assert_eq!(inv.operator_spectrum.len(), 10);
        assert!((inv.operator_spectrum[0] + 1.0).abs() < 1e-12);
        assert!(inv.operator_spectrum[1..].iter().all(|s| s.abs() < 1e-12));
        let ric = [-1.0, -1.0, 0.0, 0.0, 0.0];
        assert!(inv.ricci_spectrum.iter().zip(ric).all(|(a, b)| (a - b).abs() < 1e-12));
        let tr: f64 = inv.ricci_spectrum.iter().sum();
        assert!((tr - inv.scalar).abs() < 1e-10);
    }

    #[test]
    fn flat_invariants_vanish() {
        let inv = invariants_of(&CurvatureTensor::zero(4));
        assert_eq!(inv.scalar, 0.0);
        assert!(inv.ricci_spectrum.iter().chain(&inv.operator_spectrum).all(|&s| s == 0.0));
    }

    #[test]
    fn scale_and_dimension_are_detected() {
        let inv = ModelReference::HyperbolicPlaneTimesFlat { a: 1.0, flat_dim: 3 }.invariants();
        let two = ModelReference::HyperbolicPlaneTimesFlat {
            a: 2f64.sqrt(),
            flat_dim: 3,
        };
        assert!(!matches_model(&inv, &two).unwrap());
        assert!(matches!(matches_model(&inv, &ModelReference::SL2Left), Err(Error::Shape(_))));
    }
}
