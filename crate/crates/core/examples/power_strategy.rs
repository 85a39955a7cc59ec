//! Wealth and consumption under the optimal power-utility policy, and its
//! realised objective against the perturbed policies on common paths.

use levy_merton::levy::stream_rng;
use levy_merton::pide;
use levy_merton::strategy;
use levy_merton::{MarketModel, OuParams, Result, SolverGrid, SubordinatorSpec};

pub fn run_example() -> Result<()> {
    let model = MarketModel::bns_example();
    let ou = OuParams::new(1.0 / 6.0, 0.2, SubordinatorSpec::compound_poisson_exp(0.5, 15.0)?)?;
    let surface = pide::solve(&model, &ou, &SolverGrid::new(2000, 200, 2.0))?.surface;

    let path = strategy::simulate_power(&surface, &model, &ou, 1000, 1.0, &mut stream_rng(3, 0))?;
    for k in (0..=1000).step_by(250) {
        println!(
            "t = {:.2}: Y = {:.4}, X = {:.4}, c/X = {:.4}, pi = {}",
            path.times[k], path.levels[k], path.wealth[k], path.consumption_ratio[k], path.fraction[k]
        );
    }
    println!("realised utility {:.6}", strategy::utility_score(&path, model.gamma()));

    let (optimal, results) = strategy::optimality_probe(&surface, &model, &ou, 200, 500, 1.0, 5)?;
    println!("mean utility under the optimal policy {:.5} +- {:.1e}", optimal.mean, optimal.std_error);
    for r in results {
        println!("  advantage over {:<24} {:+.5} +- {:.1e}", r.name, r.advantage.mean, r.advantage.std_error);
    }
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
