//! Max-plus Birkhoff sums along sampled orbits reach `sup f`; prints the
//! fraction of orbits that have done so by time `n`.

use maxplus_thermo::dynamics::{birkhoff_limit_test, OrbitSampler, SymbolMeasure};
use maxplus_thermo::shift::DepthKFunction;

fn main() -> maxplus_thermo::Result<()> {
    // depth-2 observable with its maximum on the word 1 2
    let f = DepthKFunction::new(2, 2, vec![0.2, 1.0, -0.5, 0.0])?;
    let transition = vec![vec![0.9, 0.1], vec![0.4, 0.6]];
    let markov = SymbolMeasure::markov(2, 1, vec![0.8, 0.2], transition)?;
    for (name, m) in [("bernoulli(1/2)", SymbolMeasure::two_symbol(0.5)?), ("markov", markov)] {
        let sampler = OrbitSampler::new(m, 10_000, 200, 5)?;
        let rep = birkhoff_limit_test(&sampler, &f, 1e-12)?;
        let fractions: Vec<String> = [1, 2, 5, 10, 50].iter().map(|&n| format!("{:.3}", rep.fraction_by(n))).collect();
        println!("{name}: sup f {} attained by all {}; by n = 1, 2, 5, 10, 50: {}", rep.sup_f, rep.all_attained(), fractions.join(" "));
    }
    Ok(())
}
