//! Tree W1 on cylinder tables, the LP cross-check, and the contraction of
//! dual transfer operators at rate `(d + 1)γ`.

use maxplus_thermo::shift::{CylinderMeasure, Jacobian, ShiftSpace};
use maxplus_thermo::transport::{contraction_check, w1_lp_oracle, w1_tree_report};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> maxplus_thermo::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let s = ShiftSpace::new(2, 0.3)?;
    let mu = CylinderMeasure::random(&s, 4, 0.2, &mut rng)?;
    let nu = CylinderMeasure::random(&s, 4, 0.2, &mut rng)?;
    let tree = w1_tree_report(&mu, &nu, &s)?;
    let lp = w1_lp_oracle(&mu, &nu, &s)?;
    println!("W1 tree {:.15}  lp {:.15}  truncation {:.1e}", tree.w1, lp.w1, tree.truncation);

    let mut worst = 0.0f64;
    for _ in 0..500 {
        let j = Jacobian::random(&s, 2, &mut rng)?;
        let a = CylinderMeasure::random(&s, 3, 0.3, &mut rng)?;
        let b = CylinderMeasure::random(&s, 3, 0.3, &mut rng)?;
        if a != b {
            worst = worst.max(contraction_check(&j, &a, &b, &s)?);
        }
    }
    println!("largest contraction ratio over 500 trials {worst:.4} (rate {:.2})", s.rate());
    Ok(())
}
