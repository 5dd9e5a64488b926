//! Curvature-homogeneous Riemannian metrics with nontrivial κ-nullity.
//!
//! Two families are built as deformations of homogeneous metrics along the
//! vertical distribution of an integrable Riemannian submersion: warped
//! left-invariant metrics on SL(2,ℝ) and warped almost-abelian metrics on
//! S¹ ⋉ V. Curvature is computed along three independent routes:
//!
//! * closed-form deformation tables ([`warp`]),
//! * a moving-frame engine over truncated Taylor jets ([`frame_geometry`]),
//! * finite differences of chart metric components ([`oracle`]).
//!
//! On top of those sit κ-nullity ([`nullity`]), orthogonal curvature
//! invariants ([`homogeneity`]) and the infinitesimal holonomy algebra
//! ([`holonomy`]).

pub mod cli;
pub mod error;
pub mod frame_geometry;
pub mod holonomy;
pub mod homogeneity;
pub mod jets;
pub mod models;
pub mod nullity;
pub mod oracle;
pub mod par;
pub mod rng;
pub mod warp;

pub use error::{Error, Result};
pub use frame_geometry::{ConnectionTable, CurvatureTensor, OrthoFrame};
pub use jets::{Jet, ScalarField};
pub use par::Execution;
