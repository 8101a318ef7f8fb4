//! Shannon entropy plus a linear observable: the grid equilibrium against softmax.

use maxplus_thermo::simplex::{
    gibbs_solution, inclusion_j, level2_pressure, log_sum_exp, shannon_density, Level1Observable, SimplexGrid,
};

fn main() -> maxplus_thermo::Result<()> {
    let g = Level1Observable::new(vec![0.5, -0.3, 1.1])?;
    let grid = SimplexGrid::new(3, 150)?;
    let eq = level2_pressure(&shannon_density, &inclusion_j(&g), &grid, 1e-9);
    let best = eq.best.expect("grid is nonempty");
    let soft = gibbs_solution(&g);
    println!("pressure      {:.12}", eq.value.to_f64());
    println!("log-sum-exp   {:.12}", log_sum_exp(g.coefficients()));
    println!("equilibrium   {:?}", best.masses());
    println!("softmax       {:?}", soft.masses());
    println!("Linf distance {:.2e}", best.linf_distance(&soft));
    Ok(())
}
