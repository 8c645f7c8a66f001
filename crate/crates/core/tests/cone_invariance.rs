use qds_core::cone::{
    cone_membership, grid_eps, nested_product, random_cone_density, recursive_decompose, ConeParams,
};
use qds_core::observable::ObservableSpec;
use qds_core::pm_map::PmMap;
use qds_core::transfer_op::{build_ulam, exact_transfer_cell_averages, l1_distance, GridDensity, OperatorCache};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 1024;

#[test]
fn pushforwards_stay_in_the_cone() {
    let params = ConeParams::new(0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let d = random_cone_density::<f64, _>(&mut rng, N, &params).unwrap();
        assert!(cone_membership(&d, &params, grid_eps(1e-9, N)).unwrap().passes);
        let alpha: f64 = rng.random_range(0.0..=0.5);
        let out = build_ulam(&PmMap::new(alpha).unwrap(), N).unwrap().apply(&d).unwrap();
        let r = cone_membership(&out, &params, grid_eps(1e-6, N)).unwrap();
        assert!(r.passes, "alpha={alpha} {r:?}");
    }
}

#[test]
fn nested_decompositions() {
    let params = ConeParams::new(0.5).unwrap();
    let cache = OperatorCache::new();
    let h = GridDensity::<f64>::uniform(N);
    let fs = [ObservableSpec::cos_pi(),
        ObservableSpec::affine(-0.5, 1.0).unwrap(),
        ObservableSpec::polynomial(vec![0.2, -1.0, 0.7]).unwrap()];
    let gaps = [vec![0.25, 0.4, 0.1], vec![0.5, 0.3]];
    for k in 1..=3 {
        let d = recursive_decompose(&fs[..k], &h, &gaps[..k - 1], &params, &cache).unwrap();
        assert_eq!(d.pieces.len(), 1 << k);
        let target = nested_product(&fs[..k], &h, &gaps[..k - 1], &cache).unwrap();
        let scale = d.pieces.iter().map(|p| p.density.max_abs()).fold(0.0, f64::max);
        let diff = d.signed_sum().checked_sub(&target).unwrap().max_abs();
        assert!(diff <= 1e-9 * scale, "k={k} diff={diff} scale={scale}");
        for p in &d.pieces {
            let r = cone_membership(&p.density, &params, grid_eps(1e-9, N)).unwrap();
            assert!(r.passes, "k={k} {r:?}");
            assert!(p.density.mass() <= d.mass_budget);
        }
    }
}

#[test]
fn two_level_product_matches_exact_transfer() {
    let params = ConeParams::new(0.5).unwrap();
    let cache = OperatorCache::new();
    let f = ObservableSpec::cos_pi();
    let h = GridDensity::<f64>::uniform(N);
    let d = recursive_decompose(&[f.clone(), f.clone()], &h, &[vec![0.25]], &params, &cache).unwrap();
    let map = PmMap::new(0.25).unwrap();
    let oracle = exact_transfer_cell_averages(&map, |x: f64| f.value(x), N)
        .unwrap()
        .multiplied_by(|x| f.value(x));
    let dist = l1_distance(&d.signed_sum(), &oracle).unwrap();
    assert!(dist <= 5.0 / N as f64, "{dist}");
}
