//! Paths A, B and C agree on random members of both families.

mod common;

use common::{path_c, plain_fd_error};
use curvhom::models::{build_almost_abelian, build_sl2r, AlmostAbelianSpec, ChartModel, PeriodicPhi};
use curvhom::rng::SampleRng;
use proptest::prelude::*;

fn agree<M: ChartModel>(model: &M, seed: u64) -> Result<(), TestCaseError> {
    let p = model.sample_point(&mut SampleRng::new(seed));
    let a = model.curvature_tables(&p).unwrap();
    let b = model.curvature_frame(&p).unwrap();
    let c = path_c(model, &p);
    prop_assert!(a.max_abs_diff(&b) <= 1e-9, "A vs B {:e}", a.max_abs_diff(&b));
    prop_assert!(a.max_abs_diff(&c) <= 1e-6, "A vs C {:e}", a.max_abs_diff(&c));
    prop_assert!(b.max_abs_diff(&c) <= 1e-6, "B vs C {:e}", b.max_abs_diff(&c));
    let e1 = plain_fd_error(model, &p, 2.5e-3, &a);
    let e2 = plain_fd_error(model, &p, 1.25e-3, &a);
    if e1 > 1e-9 {
        prop_assert!((e1 / e2 - 4.0).abs() <= 0.5, "halving ratio {}", e1 / e2);
    }
    Ok(())
}

fn phi() -> impl Strategy<Value = PeriodicPhi> {
    (1usize..=3).prop_flat_map(|h| {
        (prop::collection::vec(-0.4..0.4f64, h), prop::collection::vec(-0.4..0.4f64, h))
            .prop_map(|(cos, sin)| PeriodicPhi { cos, sin })
    })
}

fn almost_abelian() -> impl Strategy<Value = AlmostAbelianSpec> {
    let weights = prop::sample::select(vec![vec![1], vec![1, 2], vec![1, 3], vec![2, 3], vec![1, 2, 3]]);
    (weights, 0.5..2.0f64, 0.2..2.0f64, 0.0..2.0f64).prop_flat_map(|(w, a, c1, c2)| {
        let m = 2 * w.len();
        prop::collection::vec(-1.0..1.0f64, m)
            .prop_filter("nonzero Z", |z| z.iter().map(|x| x * x).sum::<f64>() > 1e-2)
            .prop_map(move |z| AlmostAbelianSpec::new(w.clone(), a, c1, c2, z))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sl2_paths_agree(phi in phi(), seed in any::<u64>()) {
        agree(&build_sl2r(phi).unwrap(), seed)?;
    }

    #[test]
    fn almost_abelian_paths_agree(spec in almost_abelian(), seed in any::<u64>()) {
        agree(&build_almost_abelian(&spec).unwrap(), seed)?;
    }
}
