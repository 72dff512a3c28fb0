use homog_core::analysis::{apriori_ratio, dense_oracle};
use homog_core::green::subspace_defect;
use homog_core::material::sample_analytic;
use homog_core::solver::{
    solve_cg, solve_cg_observed, solve_neumann, LoadCase, SolverConfig, Termination,
};
use homog_core::transforms::l2_norm;
use homog_core::{CoefficientField, GreenOperator, GridField, GridSpec, ReferenceTensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_material(spec: &GridSpec, seed: u64, contrast: f64) -> CoefficientField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.dim();
    sample_analytic(spec, |_| {
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            a[i * d + i] = rng.gen_range(1.0..contrast);
        }
        if d > 1 {
            let off = rng.gen_range(-0.4..0.4) * a[0].min(a[d + 1]);
            a[1] = off;
            a[d] = off;
        }
        a
    })
    .unwrap()
}

fn shape_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop_oneof![
        (1usize..12).prop_map(|n| vec![2 * n + 1]),
        (1usize..5, 1usize..5).prop_map(|(a, b)| vec![2 * a + 1, 2 * b + 1]),
        (1usize..3, 1usize..3, 1usize..3).prop_map(|(a, b, c)| vec![2 * a + 1, 2 * b + 1, 2 * c + 1]),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn cg_solutions_lie_in_e_and_obey_the_bound(shape in shape_strategy(), seed in any::<u64>(), contrast in 1.5f64..50.0) {
        let spec = GridSpec::unit(&shape).unwrap();
        let a = random_material(&spec, seed, contrast);
        let d = spec.dim();
        let load = LoadCase::new((0..d).map(|i| 1.0 - 0.3 * i as f64).collect::<Vec<_>>()).unwrap();
        let tol = 1e-10;
        let mut worst: f64 = 0.0;
        let r = solve_cg_observed(&a, &load, &SolverConfig::cg(tol, 2000), None, |i, x| {
            if i > 0 && l2_norm(x) > 0.0 {
                worst = worst.max(subspace_defect(x).max());
            }
        }).unwrap();
        prop_assert!(r.converged());
        prop_assert!(worst <= 1e-10);
        prop_assert!(apriori_ratio(&a, &r) <= 1.0 + 10.0 * tol);
    }

    #[test]
    fn cg_agrees_with_dense_solve(seed in any::<u64>(), n in 1usize..5) {
        let spec = GridSpec::new(&[1.0, 1.5], &[2 * n + 1, 5]).unwrap();
        let a = random_material(&spec, seed, 20.0);
        let load = LoadCase::new(vec![0.5, 1.0]).unwrap();
        let oracle = dense_oracle(&a, &load).unwrap();
        let r = solve_cg(&a, &load, &SolverConfig::cg(1e-14, 1000), None).unwrap();
        let mut diff = r.solution.clone();
        diff.add_scaled(-1.0, &oracle);
        prop_assert!(diff.max_abs() <= 1e-10);
    }
}

#[test]
fn reference_scaling_leaves_cg_iterates_unchanged() {
    let spec = GridSpec::unit(&[15, 17]).unwrap();
    let a = random_material(&spec, 4, 30.0);
    let load = LoadCase::unit(2, 1);
    let runs: Vec<Vec<GridField>> = [0.5, 1.0, 10.0]
        .iter()
        .map(|&l| {
            let cfg = SolverConfig::cg(1e-9, 500).with_reference(ReferenceTensor::scalar(2, l).unwrap());
            let mut its = Vec::new();
            solve_cg_observed(&a, &load, &cfg, None, |_, x| its.push(x.clone())).unwrap();
            its
        })
        .collect();
    for other in &runs[1..] {
        assert_eq!(other.len(), runs[0].len());
        for (x, y) in other.iter().zip(&runs[0]).skip(1) {
            let mut diff = x.clone();
            diff.add_scaled(-1.0, y);
            assert!(l2_norm(&diff) <= 1e-10 * l2_norm(y));
        }
    }
}

/// Largest eigenvalue modulus of `e -> -Gamma0 (A - A0) e` on `E_N + U_N`
/// by power iteration.
fn iteration_radius(a: &CoefficientField, lambda: f64) -> f64 {
    let spec = a.spec();
    let d = spec.dim();
    let green = GreenOperator::new(spec, &ReferenceTensor::scalar(d, lambda).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut e = GridField::vector(spec, (0..d * spec.total()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let mut growth = 0.0;
    for _ in 0..200 {
        let mut p = a.apply(&e).unwrap();
        p.add_scaled(-lambda, &e);
        let mut next = green.apply_gamma0(&p).unwrap();
        next.scale(-1.0);
        growth = l2_norm(&next) / l2_norm(&e);
        next.scale(1.0 / l2_norm(&next));
        e = next;
    }
    growth
}

#[test]
fn neumann_divergence_matches_spectral_radius() {
    let spec = GridSpec::unit(&[7, 7]).unwrap();
    let a = homog_core::Family::Inclusion { contrast: 10.0, radius: 0.6 }.sample(&spec).unwrap();
    assert!(iteration_radius(&a, 0.01) > 1.0);
    let optimal = 0.5 * (a.lower_bound() + a.upper_bound());
    let rho = iteration_radius(&a, optimal);
    assert!(rho < 1.0);
    assert!(rho <= (a.contrast() - 1.0) / (a.contrast() + 1.0) + 1e-8);

    let cfg = SolverConfig::neumann(1e-8, 10_000).with_reference(ReferenceTensor::scalar(2, 0.01).unwrap());
    let r = solve_neumann(&a, &LoadCase::unit(2, 0), &cfg).unwrap();
    assert!(matches!(r.termination, Termination::Diverged { .. }));

    let r = solve_neumann(&a, &LoadCase::unit(2, 0), &SolverConfig::neumann(1e-8, 10_000)).unwrap();
    assert!(r.converged());
}

#[test]
fn neumann_error_follows_contraction_estimate() {
    // error after convergence is at most update * q / (1 - q)
    let spec = GridSpec::unit(&[21, 21]).unwrap();
    let a = random_material(&spec, 9, 5.0);
    let tol = 1e-6;
    let load = LoadCase::unit(2, 0);
    let exact = solve_cg(&a, &load, &SolverConfig::cg(1e-14, 1000), None).unwrap();
    let r = solve_neumann(&a, &load, &SolverConfig::neumann(tol, 10_000)).unwrap();
    let q = (a.contrast() - 1.0) / (a.contrast() + 1.0);
    let mut diff = r.solution.clone();
    diff.add_scaled(-1.0, &exact.solution);
    let bound = tol * q / (1.0 - q) * l2_norm(&r.total_field());
    assert!(l2_norm(&diff) <= bound * (1.0 + 1e-6), "{} > {bound}", l2_norm(&diff));
}
