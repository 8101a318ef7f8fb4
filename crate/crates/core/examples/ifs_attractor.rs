//! Attractor of two weighted Bernoulli Jacobians, its density entropy at a
//! product measure, and an invariant pressure with its fixed-point check.

use maxplus_thermo::ifs::{
    attractor_build, density_entropy_estimate, invariant_pressure_solve, AttractorOptions, WeightedJacobianFamily,
    DEFAULT_BUDGET,
};
use maxplus_thermo::shift::{make_bernoulli_jacobian, CylinderMeasure, ShiftSpace};

fn main() -> maxplus_thermo::Result<()> {
    let s = ShiftSpace::new(2, 0.2)?;
    let fam = WeightedJacobianFamily::new(
        vec![make_bernoulli_jacobian(0.3, &s)?, make_bernoulli_jacobian(0.7, &s)?],
        vec![0.0, -0.5],
    )?;
    let nu0 = CylinderMeasure::uniform(&s, 6)?;
    let a = attractor_build(&fam, 8, &nu0, &s, &AttractorOptions::default())?;
    println!("{} leaves in {} clusters, epsilon {:.2e}", a.leaves.len(), a.clusters.len(), a.epsilon);

    let marginals: Vec<Vec<f64>> = (0..6).map(|i| if i % 2 == 0 { vec![0.3, 0.7] } else { vec![0.7, 0.3] }).collect();
    let target = CylinderMeasure::product(&s, &marginals)?;
    let e = density_entropy_estimate(&a, &target)?;
    println!("density entropy at the alternating product: {} (upper {}, drift {:.1e})", e.value, e.upper, e.drift);

    let g = |mu: &CylinderMeasure| mu.coarsen_to(1).map(|m| m.masses()[0]).unwrap_or(f64::NAN);
    let sol = invariant_pressure_solve(&fam, &g, 1.0, 10, &nu0, &s, DEFAULT_BUDGET)?;
    println!(
        "invariant pressure of mu[1]: {:.10} +- {:.1e}, fixed-point residual {:.1e}",
        sol.value, sol.error_bound, sol.fixed_point_residual
    );
    Ok(())
}
