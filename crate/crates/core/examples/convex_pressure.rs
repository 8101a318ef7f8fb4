//! The convex pressure of a two-bump density, its axioms, and the fact that
//! the density and its concave envelope give the same pressure.

use maxplus_thermo::maxplus::{Finite, MaxPlusValue};
use maxplus_thermo::simplex::{
    coefficient_family, convex_pressure_gamma, entropy_recovery, pressure_axioms_c1c2c3, ConcaveEnvelope,
    Level1Observable, ProbVector, SimplexGrid,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bumps(p: &ProbVector) -> MaxPlusValue {
    let x = p.masses()[0];
    Finite((-8.0 * (x - 0.2).powi(2)).max(-8.0 * (x - 0.8).powi(2)))
}

fn main() -> maxplus_thermo::Result<()> {
    let grid = SimplexGrid::new(2, 1000)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let axioms = pressure_axioms_c1c2c3(&bumps, &grid, 20, 2.0, &mut rng);
    println!("C1 {:.1e}  C2 {:.1e}  C3 {:.1e}", axioms.monotonicity, axioms.translation, axioms.convexity);

    let env = ConcaveEnvelope::build(&bumps, 4000)?;
    let env_h = |p: &ProbVector| env.eval(p);
    for phi in [[0.0, 0.0], [1.0, -0.5], [-2.0, 0.3]] {
        let phi = Level1Observable::new(phi.to_vec())?;
        let a = convex_pressure_gamma(&bumps, &phi, &grid);
        let b = convex_pressure_gamma(&env_h, &phi, &grid);
        println!("Gamma({:?}) = {a:.9} (envelope {b:.9})", phi.coefficients());
    }

    let fam = coefficient_family(2, 4.0, 41);
    println!("{:>5} {:>10} {:>10} {:>10}", "x", "h", "recovered", "envelope");
    for i in 0..=10 {
        let x = i as f64 / 10.0;
        let mu = ProbVector::new(vec![x, 1.0 - x])?;
        let rec = entropy_recovery(&bumps, &mu, &fam, &grid);
        println!("{x:>5.1} {:>10.5} {rec:>10.5} {:>10.5}", bumps(&mu).to_f64(), env.eval(&mu).to_f64());
    }
    Ok(())
}
