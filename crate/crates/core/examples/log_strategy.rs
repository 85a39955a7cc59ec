//! Under logarithmic utility the consumption fraction ignores the market.

use levy_merton::levy::stream_rng;
use levy_merton::strategy::simulate_log;
use levy_merton::{MarketModel, OuParams, Result, SubordinatorSpec};

pub fn run_example() -> Result<()> {
    let model = MarketModel::bns_example();
    let ou = OuParams::new(1.0 / 6.0, 0.2, SubordinatorSpec::compound_poisson_exp(0.5, 15.0)?)?;
    let calm = simulate_log(&model, &ou, 200, 1.0, &mut stream_rng(9, 0))?;
    let wild = simulate_log(&model, &ou.with_initial_level(1.5), 200, 1.0, &mut stream_rng(9, 1))?;
    for k in (0..=200).step_by(50) {
        println!(
            "t = {:.2}: c/X = {:.6} and {:.6}, pi = {:.3} and {:.3}",
            calm.times[k], calm.consumption_ratio[k], wild.consumption_ratio[k], calm.fraction[k], wild.fraction[k]
        );
    }
    println!("identical consumption fractions: {}", calm.consumption_ratio == wild.consumption_ratio);
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
