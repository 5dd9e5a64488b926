//! The two deformation families, as charts with explicit orthonormal frames
//! and closed-form pointwise data.

mod almost_abelian;
mod frame_eqns;
mod sl2r;

use nalgebra::DMatrix;

pub use almost_abelian::{build_almost_abelian, build_flat_almost_abelian, AlmostAbelianModel, AlmostAbelianSpec};
pub use frame_eqns::{
    eqns_residual, lc_table, lc_table_residual, rescale_frame, BracketReport, FrameFunctions,
};
pub use sl2r::{build_sl2r, lc0_table, sl2_structure, PeriodicPhi, SL2RModel};

use crate::error::{Error, Result};
use crate::frame_geometry::{levi_civita, CurvatureTensor, OrthoFrame};
use crate::oracle::{geodesic_report, integrate, Chart, GeodesicReport};
use crate::rng::SampleRng;
use crate::warp::{self, DeformedMetricSpec, WarpPointData};

/// A global chart carrying a metric, an orthonormal frame for it, and the
/// closed-form data of its description as a vertical deformation.
pub trait ChartModel: Chart + Send + Sync {
    fn name(&self) -> String;

    /// Orthonormal frame of the metric, vertical direction first.
    fn frame(&self) -> &OrthoFrame;

    /// Closed-form data for the deformation formulas; frame indices match
    /// [`ChartModel::frame`].
    fn warp_data(&self, p: &[f64]) -> Result<WarpPointData>;

    fn warp_spec(&self) -> DeformedMetricSpec;

    fn sample_point(&self, rng: &mut SampleRng) -> Vec<f64>;

    fn basepoint(&self) -> Vec<f64>;

    /// Chart components of the frame, column `i` = `E_i`.
    fn frame_matrix(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.frame().matrix_at(p)
    }

    /// Curvature from the deformation tables.
    fn curvature_tables(&self, p: &[f64]) -> Result<CurvatureTensor> {
        warp::deformed_curvature(&self.warp_data(p)?)
    }

    /// Curvature from the moving-frame engine.
    fn curvature_frame(&self, p: &[f64]) -> Result<CurvatureTensor> {
        levi_civita(self.frame(), p, 1)?.curvature()
    }

    /// Geodesic in frame form, `ẋ = E(x)·w`, `ẇ^k = −Σ Γ(i, j, k) wⁱ wʲ`,
    /// with the connection of the deformation tables. `dir` is in frame
    /// components.
    fn geodesic_frame(&self, p: &[f64], dir: &[f64], length: f64, step: f64) -> Result<GeodesicReport> {
        let n = self.dim();
        let speed = dir.iter().map(|a| a * a).sum::<f64>().sqrt();
        if dir.len() != n || !(speed > 0.0) {
            return Err(Error::DegenerateField("initial direction must be a nonzero frame vector".into()));
        }
        let mut y0 = p.to_vec();
        y0.extend(dir.iter().map(|a| a / speed));
        let rhs = |y: &[f64]| -> Result<Vec<f64>> {
            let (x, w) = y.split_at(n);
            let e = self.frame_matrix(x)?;
            let conn = warp::deformed_frame_connection(&self.warp_data(x)?)?;
            let mut out: Vec<f64> = (0..n).map(|a| (0..n).map(|i| e[(a, i)] * w[i]).sum()).collect();
            for k in 0..n {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc += conn.get(i, j, k) * w[i] * w[j];
                    }
                }
                out.push(-acc);
            }
            if out.iter().all(|v| v.is_finite()) {
                Ok(out)
            } else {
                Err(Error::Geometry("frame not finite along the geodesic".into()))
            }
        };
        let mut energies = vec![1.0];
        let run = integrate(&y0, length, step, rhs, |y| {
            energies.push(y[n..].iter().map(|a| a * a).sum());
            Ok(())
        })?;
        Ok(geodesic_report(&run, n, &energies))
    }
}
