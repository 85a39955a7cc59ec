//! Investment regimes, the reduced drift `Q` and the optimal fraction for a
//! market whose excess return turns positive and then saturates.

use levy_merton::market::Affine;
use levy_merton::{MarketModel, Result};

pub fn run_example() -> Result<()> {
    let model = MarketModel::affine(
        Affine::new(0.02, 0.0),
        Affine::new(0.0, 0.4),
        Affine::new(0.1, 0.0),
        0.5,
        1.0,
        None,
    )?;
    println!("y      regime      Q(y)       dQ/dy      pi");
    for y in [0.01, 0.05, 0.1, 0.2, 0.3, 0.5] {
        println!(
            "{y:<6} {:<11} {:<10.6} {:<10.6} {:.4}",
            format!("{:?}", model.classify_regime(y)?),
            model.q_value(y)?,
            model.q_derivative(y)?,
            model.optimal_fraction(y)?
        );
    }
    let bns = MarketModel::bns_example();
    println!("bns-example: pi(0.2) = {}, Q(0.2) = {:.6}", bns.optimal_fraction(0.2)?, bns.q_value(0.2)?);
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
