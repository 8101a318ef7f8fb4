//! Acceptance criteria: one PASS/FAIL line per criterion, exit status 1 if
//! any fails. Runs the shared battery and adds inline closed-form oracles.

use std::process::ExitCode;
use std::time::Instant;

use maxplus_thermo::dynamics::{partition_function_exact, two_symbol_ldp_bound};
use maxplus_thermo::shift::{compose_duals, make_bernoulli_jacobian, CylinderMeasure, ShiftSpace};
use maxplus_thermo::simplex::{inclusion_j, level2_pressure, shannon_density, Level1Observable, SimplexGrid};
use maxplus_thermo::verify::{self, Check};

const SEED: u64 = 0;
const BATTERY_LIMIT_SECONDS: f64 = 600.0;

/// Softmax and log-sum-exp written out directly.
fn gibbs_oracle() -> (bool, String) {
    let g = [0.3, -1.2, 0.8];
    let z: f64 = g.iter().map(|x: &f64| x.exp()).sum();
    let soft: Vec<f64> = g.iter().map(|x| x.exp() / z).collect();
    let phi = Level1Observable::new(g.to_vec()).unwrap();
    let eq = level2_pressure(&shannon_density, &inclusion_j(&phi), &SimplexGrid::new(3, 150).unwrap(), 1e-9);
    let best = eq.best.unwrap();
    let arg = best.masses().iter().zip(&soft).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let val = (eq.value.to_f64() - z.ln()).abs();
    (arg <= 1e-3 && val <= 1e-4, format!("oracle g = {g:?}: argmax {arg:.1e}, value {val:.1e}"))
}

/// `(0.3, 0.7) ⊗ (0.6, 0.4)` in word order.
fn product_oracle() -> (bool, String) {
    let s = ShiftSpace::new(2, 0.3).unwrap();
    let js = [make_bernoulli_jacobian(0.3, &s).unwrap(), make_bernoulli_jacobian(0.6, &s).unwrap()];
    let rho = compose_duals(&js, &CylinderMeasure::uniform(&s, 4).unwrap(), &s).unwrap().measure;
    let rho = rho.coarsen_to(2).unwrap();
    let want: Vec<f64> = [0.3, 0.7].iter().flat_map(|a| [0.6, 0.4].map(|b| a * b)).collect();
    let err = rho.masses().iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    (err <= 1e-12, format!("oracle outer products: {err:.1e}"))
}

/// `(1 − b) log p`, `−log p` and the exact partition integral.
fn ldp_oracle() -> (bool, String) {
    let r = two_symbol_ldp_bound(0.5, 0.5).unwrap();
    let ln2 = std::f64::consts::LN_2;
    let bound_ok = (r.bound + 0.5 * ln2).abs() <= 1e-8 && (r.t_star - ln2).abs() <= 1e-8;
    let v = partition_function_exact(0.5, ln2, 1).unwrap();
    let z_ok = (v.integral() - 0.75).abs() <= 1e-15;
    (bound_ok && z_ok, format!("oracle bound {:.8} vs {:.8}; Z_1(log 2) = {:.15}", r.bound, -0.5 * ln2, v.integral()))
}

fn line(criterion: u32, title: &str, checks: &[&Check], extra: Option<(bool, String)>) -> bool {
    let mut ok = !checks.is_empty() && checks.iter().all(|c| c.passed);
    let mut details: Vec<String> = checks.iter().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    if let Some((pass, d)) = extra {
        ok &= pass;
        details.push(d);
    }
    let seconds: f64 = checks.iter().map(|c| c.seconds).sum();
    println!("{} criterion {criterion:>2} {title} ({seconds:.2}s)", if ok { "PASS" } else { "FAIL" });
    for d in details {
        println!("       {d}");
    }
    ok
}

fn main() -> ExitCode {
    let start = Instant::now();
    let checks = verify::run_all(SEED);
    let elapsed = start.elapsed().as_secs_f64();
    let of = |k: u32| checks.iter().filter(|c| c.criterion == k).collect::<Vec<_>>();

    let titles = [
        (1, "Gibbs equilibrium on the simplex", Some(gibbs_oracle())),
        (2, "tree W1 equals the LP oracle", None),
        (3, "contraction bounds", None),
        (4, "section identity", None),
        (5, "inhomogeneous product masses", Some(product_oracle())),
        (6, "invariant IFS pressure", None),
        (7, "mpIFS duality, invariance, inverse problem", None),
        (8, "partition function and LDP worked example", Some(ldp_oracle())),
        (9, "max-plus Birkhoff sums attain sup f", None),
        (10, "convex-pressure suite", None),
        (11, "nonlinear quadratic pressure", None),
    ];
    let mut all = true;
    for (k, title, extra) in titles {
        all &= line(k, title, &of(k), extra);
    }
    let fast = elapsed <= BATTERY_LIMIT_SECONDS;
    println!(
        "{} criterion 12 full battery under {BATTERY_LIMIT_SECONDS:.0}s ({elapsed:.2}s)",
        if fast { "PASS" } else { "FAIL" }
    );
    all &= fast;
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
