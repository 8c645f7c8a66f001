use proptest::prelude::*;
use qds_core::pm_map::PmMap;
use qds_core::transfer_op::{
    build_partition_ulam, build_ulam, compose_apply, GridDensity, OperatorCache, Partition,
};

fn density(n: usize) -> impl Strategy<Value = GridDensity<f64>> {
    prop::collection::vec(0.0f64..3.0, n).prop_filter_map("zero mass", |v| {
        GridDensity::new(v).ok().and_then(|d| d.normalized().ok())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn preimages_round_trip(alpha in 0.0f64..1.0, x in 0.0f64..=1.0) {
        let map = PmMap::new(alpha).unwrap();
        let y = map.left_preimage(x, 1e-12).unwrap();
        prop_assert!((0.0..=0.5).contains(&y));
        prop_assert!((map.left_branch(y) - x).abs() <= 1e-12);
        let r = map.left_preimage_relative(x).unwrap();
        prop_assert!((map.left_branch(r) - x).abs() <= 1e-12);
        prop_assert!((map.right_preimage(x) - (x + 1.0) / 2.0).abs() == 0.0);
    }

    #[test]
    fn left_preimage_is_monotone(alpha in 0.0f64..1.0, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let map = PmMap::new(alpha).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(map.left_preimage(lo, 1e-12).unwrap() <= map.left_preimage(hi, 1e-12).unwrap());
    }

    #[test]
    fn ulam_conserves_mass_and_sign(alpha in 0.0f64..1.0, d in density(256)) {
        let out = build_ulam(&PmMap::new(alpha).unwrap(), 256).unwrap().apply(&d).unwrap();
        prop_assert!(out.is_nonnegative());
        prop_assert!((out.mass() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn composition_matches_sequential_application(
        alphas in prop::collection::vec(0.0f64..0.9, 0..5),
        d in density(128),
    ) {
        let cache = OperatorCache::new();
        let composed = compose_apply(&alphas, 128, &d, &cache).unwrap();
        let mut step = d.clone();
        for &a in &alphas {
            step = cache.operator(a, 128).unwrap().apply(&step).unwrap();
        }
        prop_assert_eq!(composed, step);
    }

    #[test]
    fn graded_operator_conserves_mass(alpha in 0.0f64..0.9, smallest_exp in 8i32..20) {
        let p = Partition::<f64>::graded(256, 64, 10f64.powi(-smallest_exp), 1.0 / 32.0).unwrap();
        let op = build_partition_ulam(&PmMap::new(alpha).unwrap(), &p).unwrap();
        let masses = p.masses_from_primitive(|x| x);
        let out = op.iterate_masses(&masses, 20);
        prop_assert!(out.iter().all(|&m| m >= 0.0));
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn single_precision_operator_conserves_mass() {
    let d = GridDensity::<f32>::uniform(512);
    let out = build_ulam(&PmMap::new(0.3f32).unwrap(), 512).unwrap().apply(&d).unwrap();
    assert!((out.mass() - 1.0).abs() < 1e-5);
}
