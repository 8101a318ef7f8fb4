//! Partition function, large-deviation bound and exact rate for the
//! two-symbol observable (`f = 1` on symbol 1, symbol 2 has mass `p`).

use maxplus_thermo::dynamics::{
    empirical_rate, partition_function_exact, partition_function_mc, partition_limit, two_symbol_indicator,
    two_symbol_ldp_bound, OrbitSampler, SymbolMeasure,
};

fn main() -> maxplus_thermo::Result<()> {
    let (p, b, t) = (0.5, 0.5, 0.3);
    println!("{:>5} {:>12} {:>12} {:>26}", "n", "exact", "mc", "95% interval");
    for n in [1, 2, 5, 10, 20] {
        let exact = partition_function_exact(p, t, n)?.c;
        let sampler = OrbitSampler::new(SymbolMeasure::two_symbol(p)?, n, 50_000, 11)?;
        let mc = partition_function_mc(&sampler, &two_symbol_indicator(), -t)?;
        println!("{n:>5} {exact:>12.6} {:>12.6} [{:>11.6}, {:>11.6}]", mc.value, mc.ci_low, mc.ci_high);
    }
    println!("limit max(-t, log p) = {:.6}", partition_limit(p, t));
    let bound = two_symbol_ldp_bound(p, b)?;
    let rate = empirical_rate(p, b, &[10, 100, 1000])?;
    println!("bound {:.8} at t* = {:.8}; rate {}", bound.bound, bound.t_star, rate.limit);
    Ok(())
}
