//! Property tests for the invariants of each module.

use maxplus_thermo::dynamics::{
    chebyshev_step, empirical_rate, maxplus_birkhoff, partition_function_exact, two_symbol_indicator,
    two_symbol_ldp_bound,
};
use maxplus_thermo::ifs::{
    attractor_build, invariant_pressure_solve, mpifs_delta_family, mpifs_invariance_check, mpifs_markov,
    mpifs_ruelle, AttractorOptions, MpIFSSystem, WeightedJacobianFamily, DEFAULT_BUDGET,
};
use maxplus_thermo::maxplus::{axioms_check, DensitySample, Finite, IdempotentPressure, MaxPlusValue};
use maxplus_thermo::search::SearchOptions;
use maxplus_thermo::shift::{
    dual_apply, lipschitz_constant, pushforward_apply, transfer_apply, CylinderMeasure, DepthKFunction,
    Jacobian, ShiftSpace, Word,
};
use maxplus_thermo::simplex::{
    coefficient_family, entropy_recovery, inclusion_j, nonlinear_pressure, Level1Observable, MeasureFamily,
    NonlinearSpec, ProbVector, SimplexGrid,
};
use maxplus_thermo::transport::{w1_lp_oracle, w1_tree};
use proptest::prelude::{any, prop, ProptestConfig};
use proptest::{prop_assert, prop_assert_eq, proptest};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn space(d: usize) -> ShiftSpace {
    ShiftSpace::new(d, 0.9 / (d as f64 + 1.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pressure_axioms_on_finite_densities(
        h in prop::collection::vec(-5.0f64..0.0, 1..20),
        seed in any::<u64>(),
        c in -3.0f64..3.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = h.len();
        let mut values: Vec<MaxPlusValue> = h.iter().map(|&x| Finite(x)).collect();
        values[rng.gen_range(0..n)] = Finite(0.0);
        let ell = IdempotentPressure::new(DensitySample::new((0..n).collect(), values).unwrap());
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let g2: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let rep = axioms_check(&ell, |i: &usize| g[*i], |i: &usize| g2[*i], c);
        prop_assert!(rep.max_residual() <= 1e-12);
        prop_assert_eq!(ell.eval(|_| c), Finite(c));
    }

    #[test]
    fn level1_join_dominates(a in prop::collection::vec(-3.0f64..3.0, 3), b in prop::collection::vec(-3.0f64..3.0, 3), x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let phi = Level1Observable::new(a).unwrap();
        let psi = Level1Observable::new(b).unwrap();
        let (x, y) = (x.min(1.0 - y), y.min(1.0 - x));
        let mu = ProbVector::new(vec![x, y, 1.0 - x - y]).unwrap();
        let joined = inclusion_j(&phi.pointwise_max(&psi))(&mu);
        prop_assert!(joined >= inclusion_j(&phi)(&mu).max(inclusion_j(&psi)(&mu)) - 1e-12);
    }

    #[test]
    fn density_below_recovered_density(c1 in 0.05f64..0.95, c2 in 0.05f64..0.95, k in 1.0f64..20.0) {
        let h = move |p: &ProbVector| {
            let x = p.masses()[0];
            Finite((-k * (x - c1).powi(2)).max(-k * (x - c2).powi(2) - 0.3))
        };
        let grid = SimplexGrid::new(2, 200).unwrap();
        let fam = coefficient_family(2, 6.0, 25);
        for i in [0, 37, 100, 163, 200] {
            let mu = ProbVector::new(vec![i as f64 / 200.0, 1.0 - i as f64 / 200.0]).unwrap();
            prop_assert!(h(&mu).to_f64() <= entropy_recovery(&h, &mu, &fam, &grid) + 1e-6);
        }
    }

    #[test]
    fn dual_and_pushforward_preserve_probability(seed in any::<u64>(), d in 2usize..4, n in 0usize..4, k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = space(d);
        let k = k.min(n + 1);
        let j = Jacobian::random(&s, k, &mut rng).unwrap();
        let mu = CylinderMeasure::random(&s, n, 0.3, &mut rng).unwrap();
        let nu = dual_apply(&j, &mu).unwrap();
        prop_assert_eq!(nu.depth(), n + 1);
        prop_assert!((nu.total_mass() - 1.0).abs() < 1e-12);
        if n > 0 {
            prop_assert!((pushforward_apply(&mu).unwrap().total_mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn transfer_normalization_and_contraction(seed in any::<u64>(), d in 2usize..4, kj in 1usize..4, kf in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = space(d);
        let j = Jacobian::random(&s, kj, &mut rng).unwrap();
        let one = DepthKFunction::constant(d, 1.0);
        let l1 = transfer_apply(&j, &one).unwrap();
        prop_assert!(l1.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        prop_assert_eq!(l1.depth(), kj - 1);

        let f = DepthKFunction::random(d, kf, 0.0, 1.0, &mut rng).unwrap();
        let f = f.shifted(-f.min());
        let lf = transfer_apply(&j, &f).unwrap();
        prop_assert_eq!(lf.depth(), kj.max(kf) - 1);
        let bound = s.rate() * lipschitz_constant(&f, &s);
        prop_assert!(lipschitz_constant(&lf, &s) <= bound + 1e-10);
    }

    #[test]
    fn w1_metric_and_certificate(seed in any::<u64>(), d in 2usize..4, n in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = space(d);
        let a = CylinderMeasure::random(&s, n, 0.3, &mut rng).unwrap();
        let b = CylinderMeasure::random(&s, n, 0.3, &mut rng).unwrap();
        let c = CylinderMeasure::random(&s, n, 0.3, &mut rng).unwrap();
        let ab = w1_tree(&a, &b, &s).unwrap();
        prop_assert_eq!(ab, w1_tree(&b, &a, &s).unwrap());
        prop_assert_eq!(w1_tree(&a, &a, &s).unwrap(), 0.0);
        prop_assert!(ab <= w1_tree(&a, &c, &s).unwrap() + w1_tree(&c, &b, &s).unwrap() + 1e-12);
        let lp = w1_lp_oracle(&a, &b, &s).unwrap();
        prop_assert!((lp.w1 - ab).abs() <= 1e-9);
        let f = lp.potential.unwrap();
        prop_assert!(lipschitz_constant(&f, &s) <= 1.0 + 1e-9);
        prop_assert!(a.integrate(&f).unwrap() - b.integrate(&f).unwrap() >= lp.w1 - 1e-9);
    }

    #[test]
    fn attractor_invariants(seed in any::<u64>(), m in 1usize..4, n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = space(2);
        let js: Vec<Jacobian> = (0..m).map(|_| Jacobian::random(&s, 2, &mut rng).unwrap()).collect();
        let mut w: Vec<f64> = (0..m).map(|_| -rng.gen::<f64>()).collect();
        w[rng.gen_range(0..m)] = 0.0;
        let fam = WeightedJacobianFamily::new(js, w).unwrap();
        let nu0 = CylinderMeasure::random(&s, 3, 0.3, &mut rng).unwrap();
        let a = attractor_build(&fam, n, &nu0, &s, &AttractorOptions::default()).unwrap();
        prop_assert!(a.prefix_contraction_excess(2000).unwrap() <= 1e-12);
        let zero = invariant_pressure_solve(&fam, &|_| 0.0, 0.0, n, &nu0, &s, DEFAULT_BUDGET).unwrap();
        prop_assert_eq!(zero.value, 0.0);

        // ν₀-independence of the pressure of the 1-Lipschitz mass of [1]
        let other = CylinderMeasure::point_mass(&s, &Word::new(vec![2, 2, 1], 2).unwrap()).unwrap();
        let g = |mu: &CylinderMeasure| mu.coarsen_to(1).unwrap().masses()[0];
        let va = invariant_pressure_solve(&fam, &g, 1.0, n, &nu0, &s, DEFAULT_BUDGET).unwrap().value;
        let vb = invariant_pressure_solve(&fam, &g, 1.0, n, &other, &s, DEFAULT_BUDGET).unwrap().value;
        prop_assert!((va - vb).abs() <= s.rate().powi(n as i32) + 1e-12);
    }

    #[test]
    fn mpifs_duality(seed in any::<u64>(), n in 1usize..50, maps in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = MpIFSSystem::random(n, maps, false, &mut rng).unwrap();
        let lambda = DensitySample::new(sys.points(), (0..n).map(|_| Finite(-rng.gen::<f64>())).collect()).unwrap();
        let ell = IdempotentPressure::new(lambda.clone());
        for _ in 0..5 {
            let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lhs = mpifs_markov(&ell, &f, &sys).unwrap().to_f64();
            let lf = mpifs_ruelle(&f, &sys).unwrap();
            let rhs = ell.eval(|i: &usize| lf[*i]).to_f64();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }
        let fam = mpifs_delta_family(&lambda, &sys).unwrap();
        prop_assert!(mpifs_invariance_check(&lambda, &sys, &fam, 1e-12).unwrap().agree());
    }

    #[test]
    fn partition_function_properties(p in 0.01f64..0.99, n in 1usize..200, t1 in 0.0f64..5.0, t2 in 0.0f64..5.0, b in 0.0f64..0.99) {
        prop_assert_eq!(partition_function_exact(p, 0.0, n).unwrap().c, 0.0);
        // c_n(−t) is non-increasing in t ≥ 0
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        prop_assert!(partition_function_exact(p, hi, n).unwrap().c <= partition_function_exact(p, lo, n).unwrap().c + 1e-15);
        let (lhs, rhs) = chebyshev_step(p, b, t1, n).unwrap();
        prop_assert!(lhs <= rhs + 1e-12);
        let rate = empirical_rate(p, b, &[n]).unwrap();
        prop_assert!(rate.limit.to_f64() <= two_symbol_ldp_bound(p, b).unwrap().bound + 1e-12);
    }

    #[test]
    fn birkhoff_sum_is_monotone_in_n(symbols in prop::collection::vec(1usize..3, 2..40)) {
        let f = two_symbol_indicator();
        let x = Word::new(symbols.clone(), 2).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for n in 1..=symbols.len() {
            let v = maxplus_birkhoff(&f, &x, n).unwrap();
            prop_assert!(v >= prev);
            prev = v;
        }
    }
}

#[test]
fn symmetric_nonlinear_problem_has_symmetric_maximizers() {
    for beta in [0.5, 1.5, 2.0, 3.0] {
        let spec = NonlinearSpec { f: Box::new(move |x| beta * x * x), a: Level1Observable::new(vec![0.7, -0.7]).unwrap() };
        let eq = nonlinear_pressure(&spec, MeasureFamily::Bernoulli { d: 2, m: 400 }, SearchOptions::default(), 1e-9)
            .unwrap();
        let reps = eq.clusters(1e-3);
        for r in &reps {
            let swapped = r.permuted(&[1, 0]);
            assert!(reps.iter().any(|q| q.distance(&swapped) < 1e-3), "beta {beta}: {reps:?}");
        }
    }
}
