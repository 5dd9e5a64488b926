//! Algebraic symmetries, frame independence of invariants and point
//! independence on both families.

mod common;

use common::{ktv, points, random_orthogonal};
use curvhom::homogeneity::{invariant_spread, invariants_of};
use curvhom::models::{build_sl2r, ChartModel, PeriodicPhi};
use curvhom::rng::SampleRng;

fn sl2() -> curvhom::models::SL2RModel {
    build_sl2r(PeriodicPhi {
        cos: vec![0.3, -0.1],
        sin: vec![0.2, 0.05],
    })
    .unwrap()
}

fn symmetric_everywhere<M: ChartModel>(model: &M, seed: u64) {
    for p in points(model, seed, 30) {
        for r in [model.curvature_tables(&p).unwrap(), model.curvature_frame(&p).unwrap()] {
            let s = r.symmetry_residuals();
            assert!(s.max() < 1e-9, "{s:?} at {p:?}");
        }
    }
}

#[test]
fn symmetries_hold() {
    symmetric_everywhere(&sl2(), 1);
    symmetric_everywhere(&ktv(1.5), 2);
}

fn invariants_are_frame_independent<M: ChartModel>(model: &M, seed: u64) {
    let mut rng = SampleRng::new(seed);
    let p = model.sample_point(&mut rng);
    let r = model.curvature_frame(&p).unwrap();
    let base = invariants_of(&r);
    for _ in 0..20 {
        let q = random_orthogonal(&mut rng, r.dim());
        let rotated = invariants_of(&r.in_frame(&q));
        let d = base.distance(&rotated).unwrap();
        assert!(d < 1e-9, "invariants moved by {d:e}: {base:?} vs {rotated:?}");
    }
}

#[test]
fn invariants_survive_orthogonal_change_of_frame() {
    invariants_are_frame_independent(&sl2(), 3);
    invariants_are_frame_independent(&ktv(2.0), 4);
}

#[test]
fn curvature_is_point_independent() {
    let model = sl2();
    let tensors: Vec<_> = points(&model, 5, 120).iter().map(|p| model.curvature_frame(p).unwrap()).collect();
    assert!(invariant_spread(&tensors).unwrap() < 1e-8);
    let model = ktv(1.0);
    let tensors: Vec<_> = points(&model, 6, 120).iter().map(|p| model.curvature_frame(p).unwrap()).collect();
    assert!(invariant_spread(&tensors).unwrap() < 1e-8);
    let first = &tensors[0];
    assert!(tensors.iter().all(|t| t.max_abs_diff(first) < 1e-9));
}
