use proxlab_core::catalog::{standard_1d, standard_2d};
use proxlab_core::{linalg, prox, ConvexFunction, ProxQuery};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn catalog() -> Vec<ConvexFunction> {
    let mut all = standard_1d();
    all.extend(standard_2d());
    all
}

/// Random point, pulled into the domain through the prox when `f` is infinite there.
fn point_in_domain(f: &ConvexFunction, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let x: Vec<f64> = (0..f.dim()).map(|_| rng.gen_range(-10.0..10.0)).collect();
    if f.evaluate(&x).unwrap().is_finite() && rng.gen_bool(0.5) {
        x
    } else {
        prox(ProxQuery::new(f, 1.0, &x).unwrap()).unwrap().y
    }
}

#[test]
fn subdifferentials_are_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for f in catalog() {
        let mut worst = f64::INFINITY;
        for _ in 0..10_000 {
            let x = point_in_domain(&f, &mut rng);
            let y = point_in_domain(&f, &mut rng);
            let xs = f.sample_subgradient(&x, 5.0, &mut rng).expect("x in domain");
            let ys = f.sample_subgradient(&y, 5.0, &mut rng).expect("y in domain");
            worst = worst.min(linalg::dot(&linalg::sub(&x, &y), &linalg::sub(&xs, &ys)));
        }
        assert!(worst >= -1e-10, "{}: {worst}", f.label());
    }
}

#[test]
fn evaluate_is_convex_along_segments() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for f in catalog() {
        for _ in 0..1_000 {
            let x = point_in_domain(&f, &mut rng);
            let y = point_in_domain(&f, &mut rng);
            let t: f64 = rng.gen();
            let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| t * a + (1.0 - t) * b).collect();
            let rhs = t * f.evaluate(&x).unwrap() + (1.0 - t) * f.evaluate(&y).unwrap();
            let lhs = f.evaluate(&z).unwrap();
            assert!(lhs <= rhs + 1e-10 * (1.0 + rhs.abs()), "{} at {z:?}: {lhs} > {rhs}", f.label());
        }
    }
}

#[test]
fn unique_minimizers_are_zeros_of_the_subdifferential() {
    for f in catalog() {
        if let Some(p) = f.minimizer_info().unique_point() {
            let d = f.subdifferential(p).unwrap().dist_to_zero();
            assert!(d <= 1e-9, "{}: dist(0, ∂f(p)) = {d}", f.label());
        }
    }
}

proptest! {
    #[test]
    fn shift_is_invisible_to_prox_and_subdifferential(
        idx in 0usize..17,
        c in -50.0f64..50.0,
        x0 in -10.0f64..10.0,
        x1 in -10.0f64..10.0,
    ) {
        let f = catalog().swap_remove(idx);
        let g = ConvexFunction::shifted(f.clone(), c).unwrap();
        let x = if f.dim() == 1 { vec![x0] } else { vec![x0, x1] };
        let pf = prox(ProxQuery::new(&f, 1.0, &x).unwrap()).unwrap();
        let pg = prox(ProxQuery::new(&g, 1.0, &x).unwrap()).unwrap();
        prop_assert_eq!(pf.y, pg.y);
        prop_assert_eq!(f.subdifferential(&x).unwrap(), g.subdifferential(&x).unwrap());
        prop_assert!(f.same_class(&g));
    }
}
