//! Acceptance criteria 1–9, one PASS/FAIL line each.

mod common;

use std::io::Write;
use std::process::{Command, ExitCode};
use std::time::Instant;

use common::*;
use curvhom::frame_geometry::{levi_civita, CurvatureTensor};
use curvhom::holonomy::{claims_leading_term, infinitesimal_holonomy, ConnectionSource};
use curvhom::models::{
    build_almost_abelian, build_sl2r, eqns_residual, AlmostAbelianSpec, ChartModel, FrameFunctions, PeriodicPhi,
};
use curvhom::nullity::{angle_to, kappa_scan, nullity_space, positive_kappas, subspace_distance, DEFAULT_TOL};
use curvhom::rng::SampleRng;
use curvhom::warp::{check_nullity_warp_i, check_nullity_warp_ii, deformed_frame_connection};
use curvhom::Execution;

/// Worst observed value against its tolerance, per named quantity.
#[derive(Default)]
struct Gate {
    rows: Vec<(String, f64, f64, bool)>,
}

impl Gate {
    fn at_most(&mut self, name: &str, value: f64, tol: f64) {
        self.merge(name, value, tol, value <= tol, f64::max);
    }

    fn exceeds(&mut self, name: &str, value: f64, tol: f64) {
        self.merge(name, value, tol, value > tol, f64::min);
    }

    fn holds(&mut self, name: &str, ok: bool) {
        self.merge(name, if ok { 0.0 } else { 1.0 }, 0.0, ok, f64::max);
    }

    fn merge(&mut self, name: &str, value: f64, tol: f64, ok: bool, pick: fn(f64, f64) -> f64) {
        match self.rows.iter_mut().find(|r| r.0 == name) {
            Some(r) => {
                r.1 = pick(r.1, value);
                r.3 &= ok;
            }
            None => self.rows.push((name.to_string(), value, tol, ok)),
        }
    }

    fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.3)
    }

    fn summary(&self) -> String {
        self.rows
            .iter()
            .filter(|r| !r.3)
            .map(|r| format!("{} = {:e} (tol {:e})", r.0, r.1, r.2))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

fn sl2_criteria(eps: f64, tol: f64, gate: &mut Gate) {
    let model = build_sl2r(PeriodicPhi::epsilon_cos(eps)).unwrap();
    let grid = [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0];
    let t = [0.0, 0.0, 1.0];
    for p in points(&model, 100 + (eps * 10.0) as u64, 100) {
        let b = levi_civita(model.frame(), &p, 1).unwrap().curvature().unwrap();
        let a = model.curvature_tables(&p).unwrap();
        for r in [&a, &b] {
            gate.at_most("scalar + 2", (r.scalar() + 2.0).abs(), tol);
            let k = r.sectional(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
            gate.at_most("K(X, Y) − 1", (k - 1.0).abs(), tol);
            let nu = nullity_space(r, -1.0, DEFAULT_TOL);
            gate.holds("ν₋₁ = 1", nu.index == 1);
            gate.at_most("angle(kernel, T)", angle_to(&nu.basis, &t).unwrap_or(f64::INFINITY), 1e-8);
        }
        let pos = positive_kappas(&kappa_scan(&b, &grid, DEFAULT_TOL, Execution::default()));
        gate.holds("κ-scan positive only at −1", pos == vec![-1.0]);
    }
}

fn criterion_1(g: &mut Gate) {
    sl2_criteria(0.0, 1e-10, g);
}

fn criterion_2(g: &mut Gate) {
    for eps in [0.1, 0.3, 0.7] {
        sl2_criteria(eps, 1e-8, g);
    }
}

fn criterion_3(g: &mut Gate) {
    for a in [1.0, 2.0] {
        let model = ktv(a);
        let spec = &model.spec;
        let n = spec.m + 1;
        let (z, perp) = z_and_perp(spec);
        let table = plane_curvature(n, -a * a, &unit(n, 0), &z);
        let mut pts = vec![model.basepoint()];
        pts.extend(points(&model, 300 + a as u64, 20));
        for p in &pts {
            let pa = model.curvature_tables(p).unwrap();
            let pb = model.curvature_frame(p).unwrap();
            let pc = path_c(&model, p);
            g.at_most("Path A vs table", pa.max_abs_diff(&table), 1e-10);
            g.at_most("Path B vs table", pb.max_abs_diff(&table), 1e-9);
            g.at_most("Path C vs table", pc.max_abs_diff(&table), 1e-6);
            g.at_most("scalar + 2a²", (pb.scalar() + 2.0 * a * a).abs(), 1e-8);
            let nu = nullity_space(&pb, 0.0, DEFAULT_TOL);
            g.holds("ν₀ = 3", nu.index == 3);
            g.at_most("kernel vs Z⊥ ∩ V", subspace_distance(n, &nu.basis, &perp), 1e-8);
            g.at_most("semi-symmetry", pb.semi_symmetry_residual(), 1e-9);
            let spec_op = pb.curvature_operator_spectrum();
            let mut expected = vec![0.0; spec_op.len()];
            expected[0] = -a * a;
            let d = spec_op.iter().zip(&expected).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            g.at_most("operator spectrum", d, 1e-8);
        }
    }
}

fn criterion_4(g: &mut Gate) {
    let exec = Execution::default();
    for eps in [0.1, 0.3, 0.7] {
        let model = build_sl2r(PeriodicPhi::epsilon_cos(eps)).unwrap();
        let pts = points(&model, 400, 100);
        let spec = model.warp_spec();
        let t = check_nullity_warp_i(&spec, &pts, &[0.0, 0.0, 1.0], -1.0, exec).unwrap();
        g.at_most("part (i) residual for T", t.residual, 1e-8);
        g.holds("part (i) preconditions", t.preconditions_hold);
        let y = check_nullity_warp_i(&spec, &pts, &[0.0, 1.0, 0.0], -1.0, exec).unwrap();
        g.exceeds("control z = Y", y.residual, 1e-3);
    }
    let s = 0.5f64.sqrt();
    let family = [
        AlmostAbelianSpec::new(vec![1, 2], 1.0, 1.0, 1.0, vec![s, 0.0, s, 0.0]),
        AlmostAbelianSpec::new(vec![1, 2], 2.0, 1.0, 1.0, vec![s, 0.0, s, 0.0]),
        AlmostAbelianSpec::new(vec![1, 3], 1.5, 0.5, 2.0, vec![0.6, 0.0, 0.0, 0.8]),
        AlmostAbelianSpec::new(vec![1], 1.0, 1.0, 0.0, vec![1.0, 0.0]),
        AlmostAbelianSpec::new(vec![1, 2, 3], 0.7, 1.0, 1.0, vec![0.5, 0.5, 0.5, 0.0, 0.0, 0.5]),
    ];
    for spec in &family {
        let model = build_almost_abelian(spec).unwrap();
        let pts = points(&model, 410, 50);
        let ws = model.warp_spec();
        let (z, perp) = z_and_perp(&model.spec);
        for v in &perp {
            let r = check_nullity_warp_ii(&ws, &pts, v, exec).unwrap();
            g.at_most("part (ii) residual on Z⊥ ∩ V", r.residual, 1e-8);
            g.holds("part (ii) preconditions", r.preconditions_hold);
        }
        let c = check_nullity_warp_ii(&ws, &pts, &z, exec).unwrap();
        g.exceeds("control z = Z", c.residual, 1e-3);
    }
}

fn criterion_5(g: &mut Gate) {
    let exec = Execution::default();
    let start = Instant::now();
    let cyclic = ktv(1.0);
    let rep = infinitesimal_holonomy(&cyclic, 3, ConnectionSource::Table, exec).unwrap();
    g.holds("cyclic dim = 10", rep.dim == 10);
    g.holds("stabilized by order 3", rep.stabilized_at <= 3 && rep.dims_by_order[3] == 10);
    for c in claims_leading_term(&cyclic, 3, ConnectionSource::Table, exec).unwrap() {
        g.at_most("leading-term structure", c.max(), 1e-8);
    }
    let controls = [
        AlmostAbelianSpec::new(vec![1, 1], 1.0, 1.0, 1.0, vec![0.5, 0.5, 0.5, 0.5]),
        AlmostAbelianSpec::new(vec![1, 2], 1.0, 1.0, 1.0, vec![1.0, 0.0, 0.0, 0.0]),
    ];
    for spec in &controls {
        let m = build_almost_abelian(spec).unwrap();
        let r = infinitesimal_holonomy(&m, 3, ConnectionSource::Table, exec).unwrap();
        g.holds("control dim < 10", r.dim < 10);
        g.holds("control not cyclic", !r.cyclicity.cyclic);
    }
    g.at_most("runtime (s)", start.elapsed().as_secs_f64(), 60.0);
}

fn criterion_6(g: &mut Gate) {
    let model = build_sl2r(PeriodicPhi::zero()).unwrap();
    for p in points(&model, 600, 20) {
        let r = eqns_residual(&FrameFunctions::constant(3, 0.0, 0.0, 1.0, 1.0), model.frame(), &p).unwrap();
        g.at_most("(0, 0, 1, 1) residuals", r.iter().fold(0.0f64, |m, x| m.max(x.abs())), 1e-12);
        for dk in [0.5, -0.25] {
            let r = eqns_residual(&FrameFunctions::constant(3, 0.0, 0.0, 1.0, 1.0 + dk), model.frame(), &p).unwrap();
            g.at_most("perturbed k: first three", r[..3].iter().fold(0.0f64, |m, x| m.max(x.abs())), 1e-12);
            g.at_most("perturbed k: fourth = −δk", (r[3] + dk).abs(), 1e-12);
        }
    }
}

enum Sample {
    Sl2(curvhom::models::SL2RModel),
    Aa(curvhom::models::AlmostAbelianModel),
}

fn random_sample(rng: &mut SampleRng) -> Sample {
    if rng.unit() < 0.5 {
        let h = 1 + (rng.unit() * 2.0) as usize;
        let phi = PeriodicPhi {
            cos: (0..h).map(|_| rng.uniform(-0.4, 0.4)).collect(),
            sin: (0..h).map(|_| rng.uniform(-0.4, 0.4)).collect(),
        };
        Sample::Sl2(build_sl2r(phi).unwrap())
    } else {
        let choices: [&[i64]; 5] = [&[1], &[1, 2], &[1, 3], &[2, 3], &[1, 2, 3]];
        let w = choices[(rng.unit() * choices.len() as f64) as usize % choices.len()].to_vec();
        let m = 2 * w.len();
        let spec = AlmostAbelianSpec::new(
            w,
            rng.uniform(0.5, 2.0),
            rng.uniform(0.2, 2.0),
            rng.uniform(0.0, 2.0),
            rng.normal_vec(m),
        );
        Sample::Aa(build_almost_abelian(&spec).unwrap())
    }
}

fn cross_paths<M: ChartModel>(model: &M, rng: &mut SampleRng, g: &mut Gate) {
    let p = model.sample_point(rng);
    let a = model.curvature_tables(&p).unwrap();
    let b = model.curvature_frame(&p).unwrap();
    let c = path_c(model, &p);
    g.at_most("A vs B", a.max_abs_diff(&b), 1e-9);
    g.at_most("A vs C", a.max_abs_diff(&c), 1e-6);
    g.at_most("B vs C", b.max_abs_diff(&c), 1e-6);
    let e1 = plain_fd_error(model, &p, 2.5e-3, &a);
    let e2 = plain_fd_error(model, &p, 1.25e-3, &a);
    if e1 > 1e-9 {
        g.at_most("|halving ratio − 4|", (e1 / e2 - 4.0).abs(), 0.5);
    }
}

fn criterion_7(g: &mut Gate) {
    let mut rng = SampleRng::new(700);
    for _ in 0..200 {
        match random_sample(&mut rng) {
            Sample::Sl2(m) => cross_paths(&m, &mut rng, g),
            Sample::Aa(m) => cross_paths(&m, &mut rng, g),
        }
    }
}

fn symmetry_of<M: ChartModel>(model: &M, p: &[f64], g: &mut Gate) {
    let lc = levi_civita(model.frame(), p, 1).unwrap();
    let b = lc.curvature().unwrap();
    let a = model.curvature_tables(p).unwrap();
    let tensors: [&CurvatureTensor; 2] = [&a, &b];
    for r in tensors {
        let s = r.symmetry_residuals();
        g.at_most("antisymmetry (first pair)", s.antisym_first, 1e-9);
        g.at_most("antisymmetry (last pair)", s.antisym_last, 1e-9);
        g.at_most("pair symmetry", s.pair, 1e-9);
        g.at_most("first Bianchi", s.bianchi, 1e-9);
    }
    let structure = lc.structure_values();
    let frame_table = lc.table();
    let deformed = deformed_frame_connection(&model.warp_data(p).unwrap()).unwrap();
    for t in [&frame_table, &deformed] {
        g.at_most("metric compatibility", t.metric_residual(), 1e-9);
        g.at_most("torsion-freeness", t.torsion_residual(&structure), 1e-9);
    }
}

fn criterion_8(g: &mut Gate) {
    let mut rng = SampleRng::new(800);
    for _ in 0..100 {
        match random_sample(&mut rng) {
            Sample::Sl2(m) => {
                let p = m.sample_point(&mut rng);
                symmetry_of(&m, &p, g)
            }
            Sample::Aa(m) => {
                let p = m.sample_point(&mut rng);
                symmetry_of(&m, &p, g)
            }
        }
    }
}

const DETERMINISM_CONFIGS: [&str; 2] = [
    r#"
[model]
kind = "sl2r"
epsilon = 0.3

[run]
tasks = ["curvature", "nullity_scan", "warp_check", "homogeneity", "eqns_residual", "oracle_compare", "geodesic_probe"]
points = 8
seed = 42
geodesic_shots = 2
"#,
    r#"
[model]
kind = "almost_abelian"
weights = [1, 2]
a = 1.0
z = [1.0, 0.0, 1.0, 0.0]

[run]
tasks = ["curvature", "nullity_scan", "warp_check", "holonomy", "homogeneity", "oracle_compare", "geodesic_probe"]
points = 8
seed = 42
geodesic_shots = 2
"#,
];

fn criterion_9(g: &mut Gate) {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_curvhom");
    for (i, text) in DETERMINISM_CONFIGS.iter().enumerate() {
        let path = dir.path().join(format!("run{i}.toml"));
        std::fs::write(&path, text).unwrap();
        let run = |extra: &[&str]| {
            let out = Command::new(bin).arg("run").arg(&path).args(extra).output().unwrap();
            (out.status.code(), out.stdout)
        };
        let (c1, first) = run(&[]);
        let (c2, second) = run(&[]);
        let (c3, sequential) = run(&["--sequential"]);
        g.holds("exit status 0", c1 == Some(0) && c2 == Some(0) && c3 == Some(0));
        g.holds("repeated runs byte-identical", !first.is_empty() && first == second);
        g.holds("sequential run byte-identical", first == sequential);
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn(&mut Gate)); 9] = [
        ("undeformed SL(2,ℝ)", criterion_1),
        ("deformed SL(2,ℝ) family", criterion_2),
        ("deformed almost-abelian curvature", criterion_3),
        ("nullity of warping", criterion_4),
        ("infinitesimal holonomy", criterion_5),
        ("frame equations", criterion_6),
        ("cross-path consistency", criterion_7),
        ("curvature symmetry suite", criterion_8),
        ("CLI determinism", criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let label = format!("criterion {} {}", i + 1, name);
        if !filter.is_empty() && !filter.iter().any(|s| label.contains(s.as_str())) {
            continue;
        }
        let start = Instant::now();
        let mut gate = Gate::default();
        f(&mut gate);
        let secs = start.elapsed().as_secs_f64();
        if gate.pass() {
            println!("PASS {label} ({} checks, {secs:.1} s)", gate.rows.len());
        } else {
            failed += 1;
            println!("FAIL {label}: {}", gate.summary());
        }
        std::io::stdout().flush().ok();
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
