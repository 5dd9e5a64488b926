//! Frames `(X, Y, T)` on 3-manifolds with `T` spanning the (−1)-nullity,
//! governed by functions `α, β, F` and the sectional curvature `k` of
//! `span(X, Y)`.

use serde::Serialize;

use super::sl2r::sl2_structure;
use crate::error::{Error, Result};
use crate::frame_geometry::{levi_civita, ConnectionTable, OrthoFrame};
use crate::jets::ScalarField;

const X: usize = 0;
const Y: usize = 1;
const T: usize = 2;

#[derive(Debug, Clone)]
pub struct FrameFunctions {
    pub alpha: ScalarField,
    pub beta: ScalarField,
    pub f: ScalarField,
    pub k: f64,
}

impl FrameFunctions {
    pub fn constant(nvars: usize, alpha: f64, beta: f64, f: f64, k: f64) -> Self {
        FrameFunctions {
            alpha: ScalarField::constant(nvars, alpha),
            beta: ScalarField::constant(nvars, beta),
            f: ScalarField::constant(nvars, f),
            k,
        }
    }
}

/// Residuals of `α + βF`, `T(β) − β`, `Y(F) + β(1 + F²)` and
/// `X(β) − F·Y(β) − (k − 1)`; frame order `(X, Y, T)`.
pub fn eqns_residual(ff: &FrameFunctions, frame: &OrthoFrame, at: &[f64]) -> Result<[f64; 4]> {
    let fj = frame.jets(at, 1)?;
    let alpha = ff.alpha.jet(at, 1)?;
    let beta = ff.beta.jet(at, 1)?;
    let f = ff.f.jet(at, 1)?;
    let (a, b, fv) = (alpha.value(), beta.value(), f.value());
    let t_beta = fj.derive(T, &beta)?.value();
    let y_f = fj.derive(Y, &f)?.value();
    let x_beta = fj.derive(X, &beta)?.value();
    let y_beta = fj.derive(Y, &beta)?.value();
    Ok([
        a + b * fv,
        t_beta - b,
        y_f + b * (1.0 + fv * fv),
        x_beta - fv * y_beta - (ff.k - 1.0),
    ])
}

/// The connection table these functions prescribe at a point.
pub fn lc_table(ff: &FrameFunctions, at: &[f64]) -> Result<ConnectionTable> {
    let a = ff.alpha.value(at)?;
    let b = ff.beta.value(at)?;
    let f = ff.f.value(at)?;
    let mut c = ConnectionTable::zero(3);
    let mut put = |i, j, k, v: f64| {
        c.set(i, j, k, v);
        c.set(i, k, j, -v);
    };
    // ∇_X T = X − 2FY, ∇_Y T = −Y
    put(X, T, X, 1.0);
    put(X, T, Y, -2.0 * f);
    put(Y, T, Y, -1.0);
    // ∇_X X = −T + αY, ∇_Y Y = T + βX
    put(X, X, Y, a);
    put(Y, Y, X, b);
    Ok(c)
}

/// Largest deviation of the frame's Levi-Civita table from [`lc_table`].
pub fn lc_table_residual(ff: &FrameFunctions, frame: &OrthoFrame, at: &[f64]) -> Result<f64> {
    let lc = levi_civita(frame, at, 0)?;
    Ok(lc.table().max_abs_diff(&lc_table(ff, at)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketReport {
    /// Largest deviation of the rescaled structure constants from those of SL(2,ℝ).
    pub residual: f64,
    pub tol: f64,
    pub matches: bool,
    /// Whether `β = 0` and `Y(F) = 0` hold at the point, the situation where
    /// a match is expected.
    pub hypotheses_hold: bool,
}

pub const BRACKET_TOL: f64 = 1e-9;

/// `(X, Y, T) ↦ (F⁻¹X, Y, T)` and the bracket check of the result at `at`.
pub fn rescale_frame(ff: &FrameFunctions, frame: &OrthoFrame, at: &[f64]) -> Result<(OrthoFrame, BracketReport)> {
    let fv = ff.f.value(at)?;
    if !(fv.abs() >= 1e-12) {
        return Err(Error::DivisionDomain(fv.abs()));
    }
    let f = ff.f.clone();
    let inv = ScalarField::new(f.nvars(), move |x| f.eval_vars(x)?.recip());
    let mut labels: Vec<String> = frame.labels().to_vec();
    labels[X] = format!("{}/F", labels[X]);
    let scaled = frame.scaled(labels, vec![Some(inv), None, None]);

    let lc = levi_civita(&scaled, at, 0)?;
    let residual = lc
        .structure_values()
        .iter()
        .zip(sl2_structure())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let fj = frame.jets(at, 1)?;
    let y_f = fj.derive(Y, &ff.f.jet(at, 1)?)?.value();
    let beta = ff.beta.value(at)?;
    Ok((
        scaled,
        BracketReport {
            residual,
            tol: BRACKET_TOL,
            matches: residual <= BRACKET_TOL,
            hypotheses_hold: beta.abs() <= 1e-12 && y_f.abs() <= 1e-12,
        },
    ))
}
