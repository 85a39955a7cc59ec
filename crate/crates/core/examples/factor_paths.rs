//! Exact simulation of the OU factor and its pathwise identity.

use levy_merton::levy::stream_rng;
use levy_merton::{FactorPath, OuParams, Result, SubordinatorSpec};

pub fn run_example() -> Result<()> {
    let ou = OuParams::new(1.0 / 6.0, 0.2, SubordinatorSpec::compound_poisson_exp(0.5, 15.0)?)?;
    let mut rng = stream_rng(42, 0);
    let path = FactorPath::evolve(&ou, 0.0, 10.0, &mut rng)?;
    println!("{} jumps on [0, 10]", path.jumps().len());
    for j in path.jumps().iter().take(5) {
        println!("  tau = {:.4}, z = {:.4}", j.time, j.size);
    }
    for u in [0.0, 2.5, 5.0, 7.5, 10.0] {
        println!("Y({u}) = {:.6}", path.level(u));
    }
    let lhs = ou.reversion * path.integrated_level(0.0, 10.0)? + path.level(10.0) - 0.2 - path.jump_mass(0.0, 10.0);
    println!("lambda * int Y + Y(s) - y - jumps = {lhs:.3e}");

    let dir = std::env::temp_dir().join("levy-merton-examples");
    path.write_csv(&dir.join("factor.csv"), 201)?;
    path.write_jumps_csv(&dir.join("jumps.csv"))?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
