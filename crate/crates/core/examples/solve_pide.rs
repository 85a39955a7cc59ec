//! Solves for the reduced value function on the bns-example preset and
//! prints the optimal consumption rate at a few nodes.

use levy_merton::pide::{self, consumption_surface};
use levy_merton::{MarketModel, OuParams, Result, SolverGrid, SubordinatorSpec};

pub fn run_example() -> Result<()> {
    let model = MarketModel::bns_example();
    let ou = OuParams::new(1.0 / 6.0, 0.2, SubordinatorSpec::compound_poisson_exp(0.5, 15.0)?)?;
    let sol = pide::solve(&model, &ou, &SolverGrid::new(2000, 200, 2.0))?;
    println!("kappa {:.4}, CFL {:.4}, envelope breaches {}", sol.kappa, sol.cfl, sol.breaches.len());
    let rate = consumption_surface(&sol.surface, model.gamma());
    println!("t     y     f          c/x");
    for t in [0.0, 0.5, 0.9] {
        for y in [0.1, 0.2, 0.5, 1.0] {
            println!(
                "{t:<5} {y:<5} {:<10.6} {:.6}",
                sol.surface.interpolate(t, y),
                rate.interpolate(t, y)
            );
        }
    }
    let c = &sol.constants;
    println!("B' = {:.4}, A' = {:.4}, upper envelope at (0, 0.2) = {:.4}", c.b_prime, c.a_prime, c.envelope_upper(0.0, 0.2));
    let dir = std::env::temp_dir().join("levy-merton-examples");
    sol.surface.write_csv(&dir.join("surface.csv"), model.gamma())?;
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
