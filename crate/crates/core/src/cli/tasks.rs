use serde_json::{json, Value};

use super::config::{RunConfig, Task, Tolerances};
use super::report::{Check, TaskReport};
use crate::error::Result;
use crate::frame_geometry::CurvatureTensor;
use crate::holonomy::{claims_leading_term, infinitesimal_holonomy, ConnectionSource};
use crate::homogeneity::{invariant_spread, invariants_of, ModelReference};
use crate::jets::ScalarField;
use crate::models::{
    eqns_residual, lc_table_residual, rescale_frame, AlmostAbelianModel, ChartModel, FrameFunctions, SL2RModel,
};
use crate::nullity::{self, angle_to, kappa_scan, nullity_space, orthonormalize, positive_kappas, subspace_distance};
use crate::oracle::{curvature_with, geodesic_shoot, GeodesicReport, Stencil, DEFAULT_STEP};
use crate::par::{self, Execution};
use crate::rng::SampleRng;
use crate::warp::{check_nullity_warp_i, check_nullity_warp_ii, WarpNullityReport};

/// What a family claims about its curvature.
pub(crate) enum Family<'a> {
    Sl2(&'a SL2RModel),
    Aa(&'a AlmostAbelianModel),
}

impl Family<'_> {
    fn n(&self) -> usize {
        match self {
            Family::Sl2(_) => 3,
            Family::Aa(m) => m.spec.m + 1,
        }
    }

    fn expected_scalar(&self) -> f64 {
        match self {
            Family::Sl2(_) => -2.0,
            Family::Aa(m) if m.deformed => -2.0 * m.spec.a * m.spec.a,
            Family::Aa(_) => 0.0,
        }
    }

    fn reference(&self) -> ModelReference {
        match self {
            Family::Sl2(_) => ModelReference::SL2Left,
            Family::Aa(m) => ModelReference::HyperbolicPlaneTimesFlat {
                a: m.spec.a,
                flat_dim: m.spec.m - 1,
            },
        }
    }

    /// Orthonormal basis of `Z^⊥ ∩ V` in frame components.
    fn z_perp(&self) -> Vec<Vec<f64>> {
        let Family::Aa(m) = self else {
            return Vec::new();
        };
        let n = self.n();
        let mut cands = vec![self.z_lift(m)];
        cands.extend((1..n).map(|i| unit(n, i)));
        orthonormalize(&cands, 1e-12).into_iter().skip(1).collect()
    }

    fn z_lift(&self, m: &AlmostAbelianModel) -> Vec<f64> {
        let mut z = vec![0.0];
        z.extend(m.spec.z.iter());
        z
    }
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

fn sample_points<M: ChartModel>(model: &M, seed: u64, count: usize) -> Vec<Vec<f64>> {
    let mut rng = SampleRng::new(seed);
    (0..count).map(|_| model.sample_point(&mut rng)).collect()
}

fn max_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, f64::max)
}

pub(crate) fn run_task<M: ChartModel>(
    task: Task,
    model: &M,
    family: &Family<'_>,
    cfg: &RunConfig,
    exec: Execution,
) -> Result<TaskReport> {
    let tol = &cfg.tolerances;
    let points = sample_points(model, cfg.run.seed, cfg.run.points);
    match task {
        Task::Curvature => curvature(model, family, &points, tol, exec),
        Task::NullityScan => nullity_scan(model, family, &points, cfg, exec),
        Task::WarpCheck => warp_check(model, family, &points, tol, exec),
        Task::Holonomy => holonomy(family, cfg, exec),
        Task::Homogeneity => homogeneity(model, family, &points, tol, exec),
        Task::EqnsResidual => eqns(model, family, &points, tol),
        Task::OracleCompare => oracle_compare(model, &points, tol, exec),
        Task::GeodesicProbe => geodesic_probe(model, cfg, exec),
    }
}

fn tables<M: ChartModel>(model: &M, points: &[Vec<f64>], exec: Execution) -> Result<Vec<CurvatureTensor>> {
    par::try_map(exec, points, |p| model.curvature_tables(p))
}

fn curvature<M: ChartModel>(
    model: &M,
    family: &Family<'_>,
    points: &[Vec<f64>],
    tol: &Tolerances,
    exec: Execution,
) -> Result<TaskReport> {
    let rows = par::try_map(exec, points, |p| -> Result<(CurvatureTensor, CurvatureTensor)> {
        Ok((model.curvature_tables(p)?, model.curvature_frame(p)?))
    })?;
    let paths = max_of(rows.iter().map(|(a, b)| a.max_abs_diff(b)));
    let sym = max_of(rows.iter().flat_map(|(a, b)| [a.symmetry_residuals().max(), b.symmetry_residuals().max()]));
    let scalar_err = max_of(rows.iter().map(|(a, _)| (a.scalar() - family.expected_scalar()).abs()));
    let first = &rows[0].0;
    let mut checks = vec![
        Check::at_most("tables vs frames", paths, tol.paths),
        Check::at_most("curvature symmetries", sym, tol.symmetry),
        Check::at_most("scalar curvature", scalar_err, tol.curvature),
    ];
    let mut values = json!({
        "points": points.len(),
        "scalar": first.scalar(),
        "ricci_spectrum": first.ricci_spectrum(),
        "operator_spectrum": first.curvature_operator_spectrum(),
    });
    match family {
        Family::Sl2(_) => {
            let k = rows
                .iter()
                .map(|(a, _)| a.sectional(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).map(|k| (k - 1.0).abs()))
                .collect::<Result<Vec<_>>>()?;
            values["sectional_xy"] = json!(first.sectional(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0])?);
            checks.push(Check::at_most("sectional curvature of span(X, Y)", max_of(k), tol.curvature));
        }
        Family::Aa(m) => {
            let table = m.table_curvature();
            let err = max_of(rows.iter().map(|(a, _)| a.max_abs_diff(&table)));
            checks.push(Check::at_most("tables vs component array", err, tol.table));
        }
    }
    Ok(TaskReport::new(Task::Curvature.name(), values, checks))
}

fn nullity_scan<M: ChartModel>(
    model: &M,
    family: &Family<'_>,
    points: &[Vec<f64>],
    cfg: &RunConfig,
    exec: Execution,
) -> Result<TaskReport> {
    let tol = &cfg.tolerances;
    let grid = &cfg.run.kappa_grid;
    let rs = tables(model, points, exec)?;
    let scans: Vec<Vec<nullity::NullityResult>> = rs.iter().map(|r| kappa_scan(r, grid, tol.nullity, exec)).collect();
    let indices: Vec<usize> = scans[0].iter().map(|s| s.index).collect();
    let drift = scans
        .iter()
        .map(|s| s.iter().zip(&indices).filter(|(a, b)| a.index != **b).count())
        .sum::<usize>();
    let (kappa, expected_index) = match family {
        Family::Sl2(_) => (-1.0, 1),
        Family::Aa(m) if m.deformed => (0.0, m.spec.m - 1),
        Family::Aa(m) => (0.0, m.spec.m + 1),
    };
    let expected_positive: Vec<f64> = grid.iter().copied().filter(|&k| k == kappa).collect();
    let mismatched = scans
        .iter()
        .map(|s| {
            let pos = positive_kappas(s);
            pos.iter().filter(|k| !expected_positive.contains(k)).count()
                + expected_positive.iter().filter(|k| !pos.contains(k)).count()
        })
        .sum::<usize>();
    let mut checks = vec![
        Check::count("indices identical at all points", drift, 0),
        Check::count("κ with positive index outside the expected set", mismatched, 0),
    ];
    let results: Vec<nullity::NullityResult> = rs.iter().map(|r| nullity_space(r, kappa, tol.nullity)).collect();
    let worst_index = results
        .iter()
        .map(|r| r.index.abs_diff(expected_index))
        .max()
        .unwrap_or(0);
    checks.push(Check::at_most(format!("index at κ = {kappa}"), worst_index as f64, 0.0));
    match family {
        Family::Sl2(_) => {
            let t = [0.0, 0.0, 1.0];
            let angle = results
                .iter()
                .map(|r| angle_to(&r.basis, &t).unwrap_or(f64::INFINITY))
                .fold(0.0, f64::max);
            checks.push(Check::at_most("kernel angle to T", angle, tol.kernel));
        }
        Family::Aa(m) if m.deformed => {
            let target = family.z_perp();
            let n = family.n();
            let dist = results
                .iter()
                .map(|r| subspace_distance(n, &r.basis, &target))
                .fold(0.0, f64::max);
            checks.push(Check::at_most("kernel distance to Z⊥ ∩ V", dist, tol.kernel));
        }
        Family::Aa(_) => {}
    }
    let values = json!({
        "points": points.len(),
        "kappa_grid": grid,
        "indices": indices,
        "positive_kappas": positive_kappas(&scans[0]),
    });
    Ok(TaskReport::new(Task::NullityScan.name(), values, checks))
}

fn warp_values(r: &WarpNullityReport) -> Value {
    json!({
        "residual": r.residual,
        "undeformed_residual": r.undeformed_residual,
        "preconditions": r.preconditions,
    })
}

fn warp_check<M: ChartModel>(
    model: &M,
    family: &Family<'_>,
    points: &[Vec<f64>],
    tol: &Tolerances,
    exec: Execution,
) -> Result<TaskReport> {
    let spec = model.warp_spec();
    let mut checks = Vec::new();
    let values = match family {
        Family::Sl2(_) => {
            let t = check_nullity_warp_i(&spec, points, &[0.0, 0.0, 1.0], -1.0, exec)?;
            let y = check_nullity_warp_i(&spec, points, &[0.0, 1.0, 0.0], -1.0, exec)?;
            checks.push(Check::at_most("part (i) for T", t.residual, tol.warp));
            checks.push(Check::count(
                "part (i) preconditions for T",
                t.preconditions.iter().filter(|p| !p.holds).count(),
                0,
            ));
            checks.push(Check::exceeds("control z = Y", y.residual, tol.control));
            json!({ "t": warp_values(&t), "control_y": warp_values(&y) })
        }
        Family::Aa(m) => {
            let basis = family.z_perp();
            let mut rows = Vec::new();
            for (i, z) in basis.iter().enumerate() {
                let r = check_nullity_warp_ii(&spec, points, z, exec)?;
                if m.deformed {
                    checks.push(Check::at_most(format!("part (ii) for Z⊥ basis vector {i}"), r.residual, tol.warp));
                    checks.push(Check::count(
                        format!("part (ii) preconditions for Z⊥ basis vector {i}"),
                        r.preconditions.iter().filter(|p| !p.holds).count(),
                        0,
                    ));
                }
                rows.push(warp_values(&r));
            }
            let zc = check_nullity_warp_ii(&spec, points, &family.z_lift(m), exec)?;
            if m.deformed {
                checks.push(Check::exceeds("control z = Z", zc.residual, tol.control));
            }
            json!({ "z_perp": rows, "control_z": warp_values(&zc) })
        }
    };
    Ok(TaskReport::new(Task::WarpCheck.name(), values, checks))
}

fn holonomy(family: &Family<'_>, cfg: &RunConfig, exec: Execution) -> Result<TaskReport> {
    let Family::Aa(model) = family else {
        unreachable!("rejected at validation");
    };
    let tol = &cfg.tolerances;
    let m = model.spec.m;
    let max_order = cfg.run.max_order.unwrap_or(m - 1);
    let rep = infinitesimal_holonomy(model, max_order, ConnectionSource::Table, exec)?;
    let claims = claims_leading_term(model, max_order.min(m - 1), ConnectionSource::Table, exec)?;
    let full = (m + 1) * m / 2;
    let mut checks = vec![
        Check::at_most("basis skew-symmetry", rep.algebra.skew_residual, 1e-12),
        Check::at_most("closure under bracket", rep.algebra.closure_residual, 1e-9),
        Check::count(
            "cyclicity tests agree",
            usize::from(!rep.cyclicity.consistent),
            0,
        ),
        Check::at_most("leading-term structure", claims.iter().map(|c| c.max()).fold(0.0, f64::max), tol.holonomy),
    ];
    if rep.cyclicity.cyclic && max_order + 1 >= m {
        checks.push(Check::count("dimension", rep.dim, full));
        checks.push(Check::at_most(
            "stabilized by order m − 1",
            rep.stabilized_at.saturating_sub(m - 1) as f64,
            0.0,
        ));
        checks.push(Check::count(
            "flag containment failures",
            rep.flag_containment.iter().filter(|&&b| !b).count(),
            0,
        ));
    }
    let values = json!({
        "max_order": max_order,
        "dim": rep.dim,
        "dim_so": full,
        "dim_xi_z": rep.dim_xi_z,
        "dims_by_order": rep.dims_by_order,
        "dims_xi_z_by_order": rep.dims_xi_z_by_order,
        "stabilized_at": rep.stabilized_at,
        "flag_containment": rep.flag_containment,
        "cyclicity": rep.cyclicity,
        "claims": claims,
    });
    Ok(TaskReport::new(Task::Holonomy.name(), values, checks))
}

fn homogeneity<M: ChartModel>(
    model: &M,
    family: &Family<'_>,
    points: &[Vec<f64>],
    tol: &Tolerances,
    exec: Execution,
) -> Result<TaskReport> {
    let rs = tables(model, points, exec)?;
    let spread = invariant_spread(&rs)?;
    let inv = invariants_of(&rs[0]);
    let reference = family.reference();
    let mut checks = vec![Check::at_most("invariant spread over points", spread, tol.homogeneity)];
    let undeformed = matches!(family, Family::Aa(m) if !m.deformed);
    let distance = inv.distance(&reference.invariants())?;
    if !undeformed {
        checks.push(Check::at_most("distance to model invariants", distance, tol.homogeneity));
    }
    let values = json!({
        "points": points.len(),
        "invariants": inv,
        "reference": reference,
        "distance": distance,
    });
    Ok(TaskReport::new(Task::Homogeneity.name(), values, checks))
}

fn eqns<M: ChartModel>(model: &M, family: &Family<'_>, points: &[Vec<f64>], tol: &Tolerances) -> Result<TaskReport> {
    let Family::Sl2(sl) = family else {
        unreachable!("rejected at validation");
    };
    let phi = sl.phi.clone();
    let ff = FrameFunctions {
        alpha: ScalarField::constant(3, 0.0),
        beta: ScalarField::constant(3, 0.0),
        f: ScalarField::new(3, move |x| Ok((-phi.jet(&x[2])).exp())),
        k: 1.0,
    };
    let mut eq = [0.0f64; 4];
    let mut table: f64 = 0.0;
    let mut bracket: f64 = 0.0;
    for p in points {
        let r = eqns_residual(&ff, model.frame(), p)?;
        for (acc, v) in eq.iter_mut().zip(r) {
            *acc = acc.max(v.abs());
        }
        table = table.max(lc_table_residual(&ff, model.frame(), p)?);
        bracket = bracket.max(rescale_frame(&ff, model.frame(), p)?.1.residual);
    }
    let checks = vec![
        Check::at_most("α + βF", eq[0], tol.eqns),
        Check::at_most("T(β) − β", eq[1], tol.eqns),
        Check::at_most("Y(F) + β(1 + F²)", eq[2], tol.eqns),
        Check::at_most("X(β) − F·Y(β) − (k − 1)", eq[3], tol.eqns),
        Check::at_most("LC table", table, tol.paths),
        Check::at_most("rescaled brackets vs sl(2)", bracket, tol.paths),
    ];
    let values = json!({ "points": points.len(), "residuals": eq });
    Ok(TaskReport::new(Task::EqnsResidual.name(), values, checks))
}

fn oracle_compare<M: ChartModel>(model: &M, points: &[Vec<f64>], tol: &Tolerances, exec: Execution) -> Result<TaskReport> {
    let rows = par::try_map(exec, points, |p| -> Result<(f64, f64, f64)> {
        let a = model.curvature_tables(p)?;
        let frame = model.frame_matrix(p)?;
        let c = curvature_with(model, p, Stencil::richardson(DEFAULT_STEP), &frame)?;
        let e1 = curvature_with(model, p, Stencil::plain(2.5e-3), &frame)?.max_abs_diff(&a);
        let e2 = curvature_with(model, p, Stencil::plain(1.25e-3), &frame)?.max_abs_diff(&a);
        Ok((c.max_abs_diff(&a), e1, e2))
    })?;
    let err = max_of(rows.iter().map(|r| r.0));
    let ratios: Vec<f64> = rows.iter().filter(|r| r.1 > 1e-9).map(|r| r.1 / r.2).collect();
    let ratio_dev = max_of(ratios.iter().map(|q| (q - 4.0).abs()));
    let mut checks = vec![Check::at_most("finite differences vs tables", err, tol.oracle)];
    if !ratios.is_empty() {
        checks.push(Check::at_most("step-halving ratio minus 4", ratio_dev, tol.fd_ratio));
    }
    let values = json!({
        "points": points.len(),
        "step": DEFAULT_STEP,
        "max_error": err,
        "halving_ratios": ratios,
    });
    Ok(TaskReport::new(Task::OracleCompare.name(), values, checks))
}

fn shot_row(r: &GeodesicReport) -> Value {
    json!({
        "reached": r.reached,
        "arc_length": r.arc_length,
        "energy_drift": r.energy_drift,
        "displacement": r.displacement,
        "truncated": r.truncated,
        "steps": r.steps,
    })
}

fn geodesic_probe<M: ChartModel>(model: &M, cfg: &RunConfig, exec: Execution) -> Result<TaskReport> {
    let run = &cfg.run;
    let mut rng = SampleRng::new(run.seed);
    let shots: Vec<(Vec<f64>, Vec<f64>)> = (0..run.geodesic_shots)
        .map(|_| {
            let p = model.sample_point(&mut rng);
            let v = rng.normal_vec(p.len());
            (p, v)
        })
        .collect();
    let chart = par::try_map(exec, &shots, |(p, v)| {
        geodesic_shoot(model, p, v, run.geodesic_length, run.geodesic_step)
    })?;
    let frame = par::try_map(exec, &shots, |(p, v)| {
        model.geodesic_frame(p, v, run.geodesic_length, run.geodesic_step)
    })?;
    let tol = cfg.tolerances.geodesic_energy;
    let checks = vec![
        Check::at_most("chart energy drift", max_of(chart.iter().map(|r| r.energy_drift)), tol),
        Check::at_most("frame energy drift", max_of(frame.iter().map(|r| r.energy_drift)), tol),
    ];
    let values = json!({
        "length": run.geodesic_length,
        "max_step": run.geodesic_step,
        "truncated_chart_shots": chart.iter().filter(|r| r.truncated).count(),
        "truncated_frame_shots": frame.iter().filter(|r| r.truncated).count(),
        "chart_shots": chart.iter().map(shot_row).collect::<Vec<_>>(),
        "frame_shots": frame.iter().map(shot_row).collect::<Vec<_>>(),
    });
    Ok(TaskReport::new(Task::GeodesicProbe.name(), values, checks))
}
