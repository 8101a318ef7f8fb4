//! A finite max-plus IFS: value iteration to an invariant density, the
//! invariance check, and the inverse problem for a prescribed density.

use maxplus_thermo::ifs::{
    inverse_problem_solve, mpifs_delta_family, mpifs_invariance_check, mpifs_value_iteration, MpIFSSystem,
};
use maxplus_thermo::maxplus::{DensitySample, Finite};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> maxplus_thermo::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sys = MpIFSSystem::random(8, 3, true, &mut rng)?;
    let vi = mpifs_value_iteration(&sys, 1000, 0.0)?;
    println!("value iteration converged {} in {} steps", vi.converged, vi.iterations);
    let fam = mpifs_delta_family(&vi.fixed_point, &sys)?;
    let rep = mpifs_invariance_check(&vi.fixed_point, &sys, &fam, 1e-12)?;
    println!("fixed point invariant: {} (conditions {:?})", rep.invariant(), rep.conditions());

    let h = [0.0, -0.4, -1.3, -0.2];
    let inv = inverse_problem_solve(&h)?;
    println!("inverse problem residual {}, weights q[0] = {:?}", inv.equation_residual, inv.system.weights()[0]);
    let lambda = DensitySample::new(vec![0, 1, 2, 3], h.iter().map(|&x| Finite(x)).collect())?;
    let fam = mpifs_delta_family(&lambda, &inv.system)?;
    println!("h invariant: {}", mpifs_invariance_check(&lambda, &inv.system, &fam, 1e-12)?.invariant());
    Ok(())
}
