//! A quadratic level-2 observable with two equilibrium states, and the
//! nonlinear pressure `F(x) = 2x²`, `A = (1, −1)` over Bernoulli and Markov measures.

use maxplus_thermo::search::SearchOptions;
use maxplus_thermo::simplex::{
    level2_pressure, nonlinear_pressure, shannon_density, Level1Observable, MeasureFamily, NonlinearSpec, ProbVector,
    SimplexGrid,
};

fn main() -> maxplus_thermo::Result<()> {
    let g = |p: &ProbVector| 2.0 * (p.masses()[0] - p.masses()[1]).powi(2);
    let eq = level2_pressure(&shannon_density, &g, &SimplexGrid::new(2, 2000)?, 1e-9);
    println!("level-2 pressure {:.9}", eq.value.to_f64());
    for s in eq.clusters(1e-3) {
        println!("  equilibrium {:?}", s.masses());
    }

    let spec = NonlinearSpec { f: Box::new(|x| 2.0 * x * x), a: Level1Observable::new(vec![1.0, -1.0])? };
    for family in [MeasureFamily::Bernoulli { d: 2, m: 2000 }, MeasureFamily::Markov { d: 2, m: 60 }] {
        let r = nonlinear_pressure(&spec, family, SearchOptions::default(), 1e-9)?;
        println!("{family:?}: pressure {:.9}", r.value);
        for m in r.clusters(1e-2) {
            println!("  maximizer with marginal {:?}, entropy {:.6}", m.marginal().masses(), m.ks_entropy());
        }
    }
    Ok(())
}
