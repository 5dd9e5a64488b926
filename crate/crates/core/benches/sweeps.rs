use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use curvhom::holonomy::{infinitesimal_holonomy, ConnectionSource};
use curvhom::models::{build_almost_abelian, build_sl2r, AlmostAbelianSpec, ChartModel, PeriodicPhi};
use curvhom::nullity::{kappa_scan, DEFAULT_TOL};
use curvhom::par;
use curvhom::rng::SampleRng;
use curvhom::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn points<M: ChartModel>(model: &M, count: usize) -> Vec<Vec<f64>> {
    let mut rng = SampleRng::new(1);
    (0..count).map(|_| model.sample_point(&mut rng)).collect()
}

fn ktv() -> curvhom::models::AlmostAbelianModel {
    let s = 0.5f64.sqrt();
    build_almost_abelian(&AlmostAbelianSpec::new(vec![1, 2], 1.0, 1.0, 1.0, vec![s, 0.0, s, 0.0])).unwrap()
}

fn curvature_sweep(c: &mut Criterion) {
    let sl2 = build_sl2r(PeriodicPhi::epsilon_cos(0.3)).unwrap();
    let aa = ktv();
    let sl2_points = points(&sl2, 64);
    let aa_points = points(&aa, 64);
    let mut group = c.benchmark_group("curvature_sweep_64");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("sl2r", name), |b| {
            b.iter(|| par::map(exec, &sl2_points, |p| sl2.curvature_frame(black_box(p)).unwrap()))
        });
        group.bench_function(BenchmarkId::new("almost_abelian", name), |b| {
            b.iter(|| par::map(exec, &aa_points, |p| aa.curvature_frame(black_box(p)).unwrap()))
        });
    }
    group.finish();
}

fn nullity_scan(c: &mut Criterion) {
    let aa = ktv();
    let r = aa.curvature_frame(&aa.basepoint()).unwrap();
    let grid: Vec<f64> = (0..200).map(|i| -2.0 + 0.015 * i as f64).collect();
    let mut group = c.benchmark_group("kappa_scan_200");
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| kappa_scan(black_box(&r), &grid, DEFAULT_TOL, exec)));
    }
    group.finish();
}

fn holonomy(c: &mut Criterion) {
    let aa = ktv();
    let mut group = c.benchmark_group("holonomy_order_3");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| infinitesimal_holonomy(black_box(&aa), 3, ConnectionSource::Table, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, curvature_sweep, nullity_scan, holonomy);
criterion_main!(benches);
