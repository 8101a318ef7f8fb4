//! Golden-value and property battery shared by the `verify` subcommand and the
//! acceptance test target. Each check reports pass/fail with a short detail
//! line and its wall-clock time.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{
    birkhoff_limit_test, empirical_rate, partition_function_enumerated_many, partition_function_exact,
    partition_function_mc, partition_limit, two_symbol_indicator, two_symbol_ldp_bound, OrbitSampler,
    SymbolMeasure,
};
use crate::error::Result;
use crate::ifs::{
    inverse_problem_solve, invariant_pressure_solve, mpifs_delta_family, mpifs_invariance_check,
    mpifs_value_iteration, MpIFSSystem, WeightedJacobianFamily, DEFAULT_BUDGET,
};
use crate::maxplus::{DensitySample, Finite, MaxPlusValue};
use crate::search::SearchOptions;
use crate::shift::{
    compose_duals, dual_apply, dual_apply_fixed, make_bernoulli_jacobian, pushforward_apply, CylinderMeasure,
    Jacobian, ShiftSpace, Word,
};
use crate::simplex::{
    coefficient_family, convex_pressure_gamma, entropy_of, entropy_recovery, gibbs_solution, inclusion_j,
    level2_pressure, log_sum_exp, nonlinear_pressure, pressure_axioms_c1c2c3, shannon_density,
    shannon_dual_minimizer, shannon_entropy, ConcaveEnvelope, Level1Observable, MeasureFamily, NonlinearSpec,
    ProbVector, SimplexGrid,
};
use crate::transport::{
    contraction_check, jacobian_perturbation_check, joint_contraction_check, w1_lp_oracle, w1_tree,
};

/// One line of the pass/fail table.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub criterion: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    /// Wall-clock limit folded into `passed`.
    pub limit_seconds: Option<f64>,
}

fn timed(criterion: u32, name: &'static str, limit: Option<f64>, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    let start = Instant::now();
    let (ok, mut detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    let seconds = start.elapsed().as_secs_f64();
    let in_time = limit.is_none_or(|l| seconds <= l);
    if !in_time {
        let _ = write!(detail, "; over time limit {:.0}s", limit.unwrap_or_default());
    }
    Check { criterion, name, passed: ok && in_time, detail, seconds, limit_seconds: limit }
}

fn pv(v: &[f64]) -> ProbVector {
    ProbVector::new(v.to_vec()).expect("valid probability vector")
}

fn two_bumps(p: &ProbVector) -> MaxPlusValue {
    let x = p.masses()[0];
    Finite((-8.0 * (x - 0.2).powi(2)).max(-8.0 * (x - 0.8).powi(2)))
}

/// Argmax of Shannon entropy plus `j(g)` against softmax, and the pressure against log-sum-exp.
pub fn gibbs_equilibrium(seed: u64) -> Vec<Check> {
    vec![timed(1, "gibbs-equilibrium", Some(30.0), || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grids = [SimplexGrid::new(2, 2000)?, SimplexGrid::new(3, 150)?];
        let (mut arg_err, mut val_err) = (0.0f64, 0.0f64);
        for grid in &grids {
            for _ in 0..50 {
                let g = Level1Observable::new((0..grid.dim()).map(|_| rng.gen_range(-2.0..=2.0)).collect())?;
                let eq = level2_pressure(&shannon_density, &inclusion_j(&g), grid, 1e-9);
                let best = eq.best.expect("nonempty grid");
                arg_err = arg_err.max(best.linf_distance(&gibbs_solution(&g)));
                val_err = val_err.max((eq.value.to_f64() - log_sum_exp(g.coefficients())).abs());
            }
        }
        Ok((arg_err <= 1e-3 && val_err <= 1e-4, format!("argmax Linf {arg_err:.3e}, value {val_err:.3e}")))
    })]
}

/// Closed-form tree W1 against the transportation LP.
pub fn transport_oracle(seed: u64) -> Vec<Check> {
    vec![timed(2, "tree-vs-lp", Some(60.0), || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for i in 0..200 {
            let (d, gamma) = if i % 2 == 0 { (2, 0.3) } else { (3, 0.2) };
            let s = ShiftSpace::new(d, gamma)?;
            let depth = rng.gen_range(1..=5);
            let mu = CylinderMeasure::random(&s, depth, 0.3, &mut rng)?;
            let nu = CylinderMeasure::random(&s, depth, 0.3, &mut rng)?;
            worst = worst.max((w1_tree(&mu, &nu, &s)? - w1_lp_oracle(&mu, &nu, &s)?.w1).abs());
        }
        Ok((worst <= 1e-9, format!("max |tree - lp| {worst:.3e} over 200 pairs")))
    })]
}

/// The three contraction bounds and the contraction-ratio example.
pub fn contraction(seed: u64, trials: usize, d: usize, gamma: f64) -> Vec<Check> {
    let mut ratio_max = 0.0f64;
    let mut checks = vec![timed(3, "contraction-bounds", Some(120.0), || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = ShiftSpace::new(d, gamma)?;
        let r = s.rate();
        let mut violations = [0usize; 3];
        let mut excess = [f64::NEG_INFINITY; 3];
        for _ in 0..trials {
            let k = rng.gen_range(1..=3);
            let depth = rng.gen_range(k.max(2)..=4);
            let j1 = Jacobian::random(&s, k, &mut rng)?;
            let j2 = Jacobian::random(&s, k, &mut rng)?;
            let mu = CylinderMeasure::random(&s, depth, 0.3, &mut rng)?;
            let mut nu = CylinderMeasure::random(&s, depth, 0.3, &mut rng)?;
            while nu == mu {
                nu = CylinderMeasure::random(&s, depth, 0.3, &mut rng)?;
            }
            let ratio = contraction_check(&j1, &mu, &nu, &s)?;
            ratio_max = ratio_max.max(ratio);
            let (w, bound) = jacobian_perturbation_check(&j1, &j2, &mu, &s)?;
            let joint = joint_contraction_check(&j1, &j2, &mu, &nu, &s)?;
            let base = w1_tree(&mu, &nu, &s)?;
            let gaps = [ratio * base - r * base, w - bound, joint.lhs - joint.rhs];
            for (i, g) in gaps.into_iter().enumerate() {
                excess[i] = excess[i].max(g);
                if g > 1e-10 {
                    violations[i] += 1;
                }
            }
        }
        Ok((
            violations == [0; 3],
            format!(
                "{trials} trials each; violations {violations:?}; worst excess {:.2e}/{:.2e}/{:.2e}",
                excess[0], excess[1], excess[2]
            ),
        ))
    })];
    let r = ShiftSpace::new(d, gamma).map(|s| s.rate()).unwrap_or(f64::NAN);
    checks.push(Check {
        criterion: 3,
        name: "contraction-ratio",
        passed: ratio_max <= r + 1e-10,
        detail: format!("max ratio {ratio_max:.6} <= r = {r:.6}"),
        seconds: 0.0,
        limit_seconds: None,
    });
    checks
}

/// `σ^♯ ∘ L_J^* = id` on random pairs.
pub fn section_identity(seed: u64) -> Vec<Check> {
    vec![timed(4, "section-identity", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for i in 0..1000 {
            let d = 2 + i % 2;
            let s = ShiftSpace::new(d, 0.9 / (d as f64 + 1.0))?;
            let n = rng.gen_range(0..=3);
            let k = rng.gen_range(1..=n + 1);
            let j = Jacobian::random(&s, k, &mut rng)?;
            let mu = CylinderMeasure::random(&s, n, 0.3, &mut rng)?;
            let back = pushforward_apply(&dual_apply(&j, &mu)?)?;
            for (a, b) in back.masses().iter().zip(mu.masses()) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok((worst <= 1e-12, format!("max deviation {worst:.3e} over 1000 pairs")))
    })]
}

/// Inhomogeneous products of two Bernoulli Jacobians.
pub fn product_formula(seed: u64) -> Vec<Check> {
    let mut out = vec![timed(5, "product-masses", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = ShiftSpace::new(2, 0.3)?;
        let js = [make_bernoulli_jacobian(0.3, &s)?, make_bernoulli_jacobian(0.6, &s)?];
        let starts = [
            CylinderMeasure::point_mass(&s, &Word::new(vec![2, 1], 2)?)?,
            CylinderMeasure::uniform(&s, 2)?,
            CylinderMeasure::random(&s, 3, 0.2, &mut rng)?,
        ];
        let want = [0.18, 0.12, 0.42, 0.28];
        let mut worst = 0.0f64;
        for nu0 in &starts {
            let rho = compose_duals(&js, nu0, &s)?.measure.coarsen_to(2)?;
            for (a, b) in rho.masses().iter().zip(want) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok((worst <= 1e-12, format!("max deviation from (0.18, 0.12, 0.42, 0.28) {worst:.3e}")))
    })];
    out.push(timed(5, "product-invariance", None, || {
        let s = ShiftSpace::new(2, 0.3)?;
        let nu0 = CylinderMeasure::uniform(&s, 3)?;
        let shift_gap = |p: f64, q: f64| -> Result<f64> {
            let js = [make_bernoulli_jacobian(p, &s)?, make_bernoulli_jacobian(q, &s)?];
            let rho = compose_duals(&js, &nu0, &s)?.measure;
            let pushed = pushforward_apply(&rho)?.coarsen_to(1)?;
            Ok((pushed.masses()[0] - rho.coarsen_to(1)?.masses()[0]).abs())
        };
        let inhomogeneous = shift_gap(0.3, 0.6)?;
        let constant = shift_gap(0.4, 0.4)?;
        Ok((
            inhomogeneous > 0.1 && constant <= 1e-12,
            format!("shift defect {inhomogeneous:.3} for (0.3, 0.6), {constant:.1e} for (0.4, 0.4)"),
        ))
    }));
    out
}

fn word_by_word_pressure(
    fam: &WeightedJacobianFamily,
    n: usize,
    nu0: &CylinderMeasure,
    g: &dyn Fn(&CylinderMeasure) -> f64,
) -> Result<f64> {
    let m = fam.len();
    let mut best = f64::NEG_INFINITY;
    for code in 0..m.pow(n as u32) {
        let word = Word::from_code(code, n, m);
        let mut mu = nu0.clone();
        for &i in word.symbols().iter().rev() {
            mu = dual_apply(&fam.jacobians()[i - 1], &mu)?.coarsen()?;
        }
        let wt: f64 = word.symbols().iter().map(|&i| fam.weights()[i - 1]).sum();
        best = best.max(wt + g(&mu));
    }
    Ok(best)
}

/// Attractor convergence and the invariant pressure of weighted families.
pub fn invariant_ifs(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    out.push(timed(6, "single-map-convergence", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = ShiftSpace::new(2, 0.3)?;
        let r = s.rate();
        let j = make_bernoulli_jacobian(0.3, &s)?;
        let target = CylinderMeasure::bernoulli(&s, &[0.3, 0.7], 6)?;
        let mut worst_ratio = 0.0f64;
        let mut final_gap = 0.0;
        for _ in 0..10 {
            let mut mu = CylinderMeasure::random(&s, 6, 0.3, &mut rng)?;
            let mut gap = w1_tree(&mu, &target, &s)?;
            for _ in 0..8 {
                mu = dual_apply_fixed(&j, &mu)?;
                let next = w1_tree(&mu, &target, &s)?;
                // below this the gap is rounding noise
                if gap > 1e-12 {
                    worst_ratio = worst_ratio.max(next / gap);
                }
                gap = next;
            }
            final_gap = f64::max(final_gap, gap);
        }
        Ok((
            worst_ratio <= r + 1e-12 && final_gap <= 1e-12,
            format!("worst step ratio {worst_ratio:.4} <= r = {r}; gap after 8 steps {final_gap:.1e}"),
        ))
    }));
    let s = ShiftSpace::new(2, 0.3).expect("valid space");
    let fam = || -> Result<WeightedJacobianFamily> {
        WeightedJacobianFamily::new(
            vec![make_bernoulli_jacobian(0.3, &s)?, make_bernoulli_jacobian(0.7, &s)?],
            vec![0.0, -1.0],
        )
    };
    // mass of the cylinder [1]; 1-Lipschitz for W1
    let g = |mu: &CylinderMeasure| mu.coarsen_to(1).map(|m| m.masses()[0]).unwrap_or(f64::NAN);
    out.push(timed(6, "zero-observable", None, || {
        let nu0 = CylinderMeasure::uniform(&s, 3)?;
        let v = invariant_pressure_solve(&fam()?, &|_| 0.0, 0.0, 6, &nu0, &s, DEFAULT_BUDGET)?.value;
        Ok((v == 0.0, format!("ell(0) = {v}")))
    }));
    out.push(timed(6, "start-independence", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let f = fam()?;
        let r = s.rate();
        let mut ok = true;
        let mut worst = 0.0f64;
        for n in [2, 4, 6, 8] {
            let a = CylinderMeasure::random(&s, 3, 0.3, &mut rng)?;
            let b = CylinderMeasure::point_mass(&s, &Word::new(vec![1, 2, 2], 2)?)?;
            let va = invariant_pressure_solve(&f, &g, 1.0, n, &a, &s, DEFAULT_BUDGET)?.value;
            let vb = invariant_pressure_solve(&f, &g, 1.0, n, &b, &s, DEFAULT_BUDGET)?.value;
            let gap = (va - vb).abs();
            worst = worst.max(gap / r.powi(n as i32));
            ok &= gap <= r.powi(n as i32) + 1e-15;
        }
        Ok((ok, format!("max |ell_a - ell_b| / r^N = {worst:.4}")))
    }));
    out.push(timed(6, "two-map-enumeration", None, || {
        let f = fam()?;
        let nu0 = CylinderMeasure::uniform(&s, 3)?;
        let mut mismatches = 0;
        for n in 1..=10 {
            let fast = invariant_pressure_solve(&f, &g, 1.0, n, &nu0, &s, DEFAULT_BUDGET)?.value;
            if fast != word_by_word_pressure(&f, n, &nu0, &g)? {
                mismatches += 1;
            }
        }
        Ok((mismatches == 0, format!("{mismatches} mismatches for N = 1..10")))
    }));
    out
}

/// Duality and the three invariance conditions on random finite systems.
pub fn mpifs(seed: u64) -> Vec<Check> {
    let mut out = vec![timed(7, "mpifs-duality-equivalence", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut dual, mut disagree, mut not_invariant) = (0.0f64, 0, 0);
        for trial in 0..100 {
            let n = rng.gen_range(1..=50);
            let constant = trial % 2 == 0;
            let sys = MpIFSSystem::random(n, rng.gen_range(1..=4), constant, &mut rng)?;
            let lambda = DensitySample::new(sys.points(), (0..n).map(|_| Finite(-rng.gen::<f64>())).collect())?;
            let mut fam = mpifs_delta_family(&lambda, &sys)?;
            fam.extend((0..5).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>()));
            let rep = mpifs_invariance_check(&lambda, &sys, &fam, 1e-12)?;
            dual = dual.max(rep.duality_residual);
            disagree += usize::from(!rep.agree());
            if constant {
                let vi = mpifs_value_iteration(&sys, 10_000, 0.0)?;
                let fam = mpifs_delta_family(&vi.fixed_point, &sys)?;
                let rep = mpifs_invariance_check(&vi.fixed_point, &sys, &fam, 1e-12)?;
                not_invariant += usize::from(!(vi.converged && rep.invariant()));
            }
        }
        Ok((
            dual <= 1e-12 && disagree == 0 && not_invariant == 0,
            format!("duality {dual:.1e}; disagreements {disagree}; non-invariant fixed points {not_invariant}"),
        ))
    })];
    out.push(timed(7, "mpifs-inverse-problem", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let n = rng.gen_range(1..=50);
            let mut h: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>() * 3.0).collect();
            h[rng.gen_range(0..n)] = 0.0;
            let sol = inverse_problem_solve(&h)?;
            worst = worst.max(sol.equation_residual).max(sol.pointwise_normalization).max(sol.family_normalization);
        }
        Ok((worst == 0.0, format!("max residual {worst:e}")))
    }));
    out
}

/// The two-symbol worked example for partition functions and large deviations.
pub fn ldp(seed: u64) -> Vec<Check> {
    let mut out = vec![timed(8, "partition-by-cylinders", Some(10.0), || {
        let f = two_symbol_indicator();
        let mut worst = 0.0f64;
        for p in [0.5, 0.3] {
            let m = SymbolMeasure::two_symbol(p)?;
            let ts = [0.0, 0.5, std::f64::consts::LN_2, 2.0];
            let neg: Vec<f64> = ts.iter().map(|t| -t).collect();
            for n in 1..=20 {
                let sums = partition_function_enumerated_many(&m, &f, &neg, n)?;
                for (&t, c) in ts.iter().zip(sums) {
                    let exact = partition_function_exact(p, t, n)?.integral();
                    worst = worst.max((exact - (n as f64 * c).exp()).abs());
                }
            }
        }
        Ok((worst <= 1e-10, format!("max |closed form - cylinder sum| {worst:.2e}, n <= 20")))
    })];
    out.push(timed(8, "partition-limit", None, || {
        let mut worst = 0.0f64;
        for p in [0.5, 0.3, 0.8] {
            for t in [0.1, 0.5, 1.0, 3.0] {
                worst = worst.max((partition_function_exact(p, t, 2000)?.c - partition_limit(p, t)).abs());
            }
        }
        Ok((worst <= 0.01, format!("max |c_2000(-t) - max(-t, log p)| {worst:.2e}")))
    }));
    out.push(timed(8, "ldp-bound", None, || {
        let mut worst = 0.0f64;
        for p in [0.5, 0.2, 0.7] {
            for b in [0.25, 0.5, 0.75] {
                let r = two_symbol_ldp_bound(p, b)?;
                worst = worst.max((r.bound - (1.0 - b) * p.ln()).abs()).max((r.t_star + p.ln()).abs());
            }
        }
        let half = two_symbol_ldp_bound(0.5, 0.5)?;
        Ok((worst <= 1e-8, format!("bound(0.5, 0.5) = {:.5}; max error {worst:.1e}", half.bound)))
    }));
    out.push(timed(8, "ldp-rate", None, || {
        let mut ok = true;
        for p in [0.5, 0.2, 0.7] {
            let r = empirical_rate(p, 0.5, &[10, 20, 50, 100])?;
            ok &= r.per_n.iter().all(|(_, v)| *v == Finite(p.ln())) && r.strict_gap();
        }
        let r = empirical_rate(0.5, 0.5, &[100])?;
        Ok((ok, format!("rate(0.5) = {:.5} < bound {:.5}", r.limit.to_f64(), r.bound.map_or(f64::NAN, |b| b.bound))))
    }));
    out.push(timed(8, "partition-monte-carlo", None, || {
        let sampler = OrbitSampler::new(SymbolMeasure::two_symbol(0.5)?, 8, 100_000, seed)?;
        let est = partition_function_mc(&sampler, &two_symbol_indicator(), -0.5)?;
        let exact = partition_function_exact(0.5, 0.5, 8)?.c;
        Ok((
            est.contains(exact),
            format!("exact {exact:.5} in [{:.5}, {:.5}] from 1e5 orbits", est.ci_low, est.ci_high),
        ))
    }));
    out
}

/// Sampled orbits reach `sup f` under the max-plus Birkhoff sum.
pub fn birkhoff(seed: u64) -> Vec<Check> {
    vec![timed(9, "birkhoff-sup", None, || {
        let sampler = OrbitSampler::new(SymbolMeasure::two_symbol(0.5)?, 10_000, 100, seed)?;
        let rep = birkhoff_limit_test(&sampler, &two_symbol_indicator(), 1e-12)?;
        let latest = rep.first_hits.iter().flatten().max().copied().unwrap_or(0);
        Ok((
            rep.all_attained(),
            format!(
                "{}/100 orbits attain sup f (latest at n = {latest}); miss probability per orbit 2^-10000 ~ 1e{:.0}",
                (rep.attained_fraction * 100.0).round(),
                -10_000.0 * 2f64.log10()
            ),
        ))
    })]
}

/// Axioms of the convex pressure, entropy recovery and the concave envelope.
pub fn convex_pressure(seed: u64) -> Vec<Check> {
    let grid = SimplexGrid::new(2, 1000).expect("valid grid");
    let mut out = vec![timed(10, "pressure-axioms", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = pressure_axioms_c1c2c3(&shannon_density, &grid, 20, 2.0, &mut rng);
        let b = pressure_axioms_c1c2c3(&two_bumps, &grid, 20, 2.0, &mut rng);
        let worst = a.worst().max(b.worst());
        Ok((worst <= 1e-6, format!("worst C1-C3 residual {worst:.2e}")))
    })];
    let family = coefficient_family(2, 4.0, 41);
    out.push(timed(10, "density-below-recovery", None, || {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            let mu = pv(&[x, 1.0 - x]);
            let rec = entropy_recovery(&two_bumps, &mu, &family, &grid);
            worst = worst.max(two_bumps(&mu).to_f64() - rec);
        }
        Ok((worst <= 1e-6, format!("max h - recovered {worst:.2e}")))
    }));
    out.push(timed(10, "shannon-recovery", None, || {
        let mut worst = 0.0f64;
        for x in [0.5, 0.3, 0.9] {
            let mu = pv(&[x, 1.0 - x]);
            let mut fam = family.clone();
            fam.push(shannon_dual_minimizer(&mu));
            worst = worst.max((entropy_recovery(&shannon_density, &mu, &fam, &grid) - shannon_entropy(&mu)).abs());
        }
        Ok((worst <= 1e-4, format!("max |recovered - Shannon| {worst:.2e}")))
    }));
    out.push(timed(10, "envelope-same-gamma", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        let env = ConcaveEnvelope::build(&two_bumps, 4000)?;
        let env_h = |p: &ProbVector| env.eval(p);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let phi = Level1Observable::new(vec![rng.gen_range(-2.0..=2.0), rng.gen_range(-2.0..=2.0)])?;
            let a = convex_pressure_gamma(&two_bumps, &phi, &grid);
            let b = convex_pressure_gamma(&env_h, &phi, &grid);
            worst = worst.max((a - b).abs());
        }
        let mid = pv(&[0.5, 0.5]);
        let differ = env.eval(&mid).to_f64() - two_bumps(&mid).to_f64();
        Ok((
            worst <= 1e-6 && differ > 0.5,
            format!("max |Gamma_h - Gamma_env| {worst:.2e}; densities differ by {differ:.2} at uniform"),
        ))
    }));
    out
}

/// `F(x) = 2x²`, `A = (1, −1)` over Bernoulli measures on two symbols.
pub fn nonlinear_quadratic() -> Vec<Check> {
    vec![timed(11, "quadratic-nonuniqueness", None, || {
        let spec = NonlinearSpec { f: Box::new(|x| 2.0 * x * x), a: Level1Observable::new(vec![1.0, -1.0])? };
        let eq = nonlinear_pressure(&spec, MeasureFamily::Bernoulli { d: 2, m: 2000 }, SearchOptions::default(), 1e-9)?;
        let reps = eq.clusters(1e-3);
        let objective = |x: f64| entropy_of(&[x, 1.0 - x]) + 2.0 * (2.0 * x - 1.0).powi(2);
        // critical points with x = 2p − 1 solve atanh(x) = 4x
        let (mut lo, mut hi) = (0.5f64, 1.0 - 1e-15);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid.atanh() < 4.0 * mid {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p_star = (1.0 + lo) / 2.0;
        let mut ps: Vec<f64> = reps.iter().map(|m| m.marginal().masses()[0]).collect();
        ps.sort_by(f64::total_cmp);
        let two = ps.len() == 2;
        let swapped = two && (ps[0] + ps[1] - 1.0).abs() < 1e-6;
        let not_uniform = ps.iter().all(|&p| (p - 0.5).abs() > 0.1);
        let located = two && (ps[1] - p_star).abs() < 1e-5;
        let value_ok = (eq.value - objective(p_star)).abs() < 1e-9;
        // the midpoint of the two maximizers is uniform, and strictly worse
        let non_convex = objective(0.5) < eq.value - 0.1;
        Ok((
            two && swapped && not_uniform && located && value_ok && non_convex,
            format!("maximizers p = {ps:.6?} (oracle {p_star:.6}); value {:.9}; uniform gives {:.4}", eq.value, objective(0.5)),
        ))
    })]
}

/// The whole battery.
pub fn run_all(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    out.extend(gibbs_equilibrium(seed));
    out.extend(transport_oracle(seed));
    out.extend(contraction(seed, 1000, 2, 0.3));
    out.extend(section_identity(seed));
    out.extend(product_formula(seed));
    out.extend(invariant_ifs(seed));
    out.extend(mpifs(seed));
    out.extend(ldp(seed));
    out.extend(birkhoff(seed));
    out.extend(convex_pressure(seed));
    out.extend(nonlinear_quadratic());
    out
}

/// `criterion | check | PASS/FAIL | seconds | detail`.
pub fn render_table(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
    let mut s = format!("{:>3}  {:<width$}  {:<6} {:>8}  detail\n", "#", "check", "status", "seconds");
    for c in checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "{:>3}  {:<width$}  {:<6} {:>8.2}  {}", c.criterion, c.name, status, c.seconds, c.detail);
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    let _ = writeln!(s, "{passed}/{} checks passed", checks.len());
    s
}
