use proxlab_core::catalog::{standard_1d, standard_2d};
use proxlab_core::contraction::{choose_sigma, m_bound, perturb, BoundProbe, PerturbationSpec};
use proxlab_core::metric::{metric, ProbeSpec};
use proxlab_core::{linalg, prox_operator, ConvexFunction, VectorMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn catalog() -> Vec<ConvexFunction> {
    let mut all = standard_1d();
    all.extend(standard_2d());
    all
}

fn cube(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect()
}

#[test]
fn perturbed_prox_is_scaled_prox() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for f in catalog() {
        let tf = prox_operator(&f, 1.0).unwrap();
        for sigma in [0.5, 0.1, 0.01] {
            let plan = perturb(&PerturbationSpec::new(f.clone(), sigma).unwrap());
            let tg = prox_operator(&plan.g, 1.0).unwrap();
            for _ in 0..1_000 {
                let x = cube(&mut rng, f.dim());
                let gap = linalg::dist(&tg.apply(&x), &linalg::scale(&tf.apply(&x), 1.0 - sigma));
                assert!(gap <= 1e-8, "{} sigma={sigma}: {gap}", f.label());
            }
        }
    }
}

#[test]
fn perturbed_prox_contracts() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for f in catalog() {
        for sigma in [0.5, 0.1, 0.01] {
            let g = ConvexFunction::perturbed(f.clone(), sigma).unwrap();
            let t = prox_operator(&g, 1.0).unwrap();
            for _ in 0..1_000 {
                let (x, y) = (cube(&mut rng, f.dim()), cube(&mut rng, f.dim()));
                let d = linalg::dist(&t.apply(&x), &t.apply(&y));
                assert!(d <= (1.0 - sigma) * linalg::dist(&x, &y) + 1e-9);
            }
        }
    }
}

#[test]
fn perturbed_subdifferential_is_strongly_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for f in catalog() {
        for sigma in [0.5, 0.1] {
            let g = ConvexFunction::perturbed(f.clone(), sigma).unwrap();
            let t = prox_operator(&g, 1.0).unwrap();
            for _ in 0..1_000 {
                // prox outputs lie in dom g
                let x = t.apply(&cube(&mut rng, f.dim()));
                let y = t.apply(&cube(&mut rng, f.dim()));
                let xs = g.sample_subgradient(&x, 5.0, &mut rng).unwrap();
                let ys = g.sample_subgradient(&y, 5.0, &mut rng).unwrap();
                let xy = linalg::sub(&x, &y);
                let lhs = linalg::dot(&xy, &linalg::sub(&xs, &ys));
                let bound = sigma / (1.0 - sigma) * linalg::norm_sq(&xy);
                assert!(lhs >= bound - 1e-9 * (1.0 + bound), "{}: {lhs} < {bound}", g.label());
            }
        }
    }
}

#[test]
fn distance_shrinks_with_sigma() {
    let probe = ProbeSpec::Mesh { h: 1e-3 };
    for f in standard_1d() {
        let uppers: Vec<f64> = (1..=10)
            .map(|k| {
                let g = ConvexFunction::perturbed(f.clone(), 0.5f64.powi(k)).unwrap();
                metric(&f, &g, 10, &probe).unwrap().upper
            })
            .collect();
        for w in uppers.windows(2) {
            assert!(w[1] <= w[0], "{}: {uppers:?}", f.label());
        }
    }
}

#[test]
fn sigma_bound_law() {
    let probe = ProbeSpec::Mesh { h: 1e-3 };
    for f in standard_1d() {
        let m = m_bound(&f, 20.0, &BoundProbe::Coarse).unwrap();
        for eps in [0.1, 0.01] {
            for frac in [0.99, 0.5, 0.1] {
                let sigma = frac * eps / (2.0 * m);
                let g = ConvexFunction::perturbed(f.clone(), sigma).unwrap();
                assert!(metric(&f, &g, 20, &probe).unwrap().upper < eps, "{} eps={eps}", f.label());
            }
            let plan = choose_sigma(&f, eps, 20, &probe).unwrap();
            assert_eq!(plan.achieved(), Some(true));
            assert!(plan.sigma < eps / (2.0 * plan.m_bound.unwrap()));
        }
    }
}

#[test]
fn mesh_bound_never_undercuts_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for f in standard_2d() {
        let m = m_bound(&f, 3.0, &BoundProbe::Mesh { h: 0.05 }).unwrap();
        let t = prox_operator(&f, 1.0).unwrap();
        for _ in 0..2_000 {
            let x = linalg::project_ball(&cube(&mut rng, 2), &[0.0, 0.0], 3.0);
            assert!(linalg::norm(&t.apply(&x)) <= m + 1e-12, "{}", f.label());
        }
    }
}
