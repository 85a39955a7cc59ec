//! The path-averaged certainty-equivalent solution is not the value
//! function: with jumps, the operator applied to its mean falls short of it.

use levy_merton::oracle::{jensen_gap, JensenConfig};
use levy_merton::{MarketModel, OuParams, Result, SubordinatorSpec};

pub fn run_example() -> Result<()> {
    let model = MarketModel::bns_example();
    for spec in [SubordinatorSpec::compound_poisson_exp(0.5, 15.0)?, SubordinatorSpec::Null] {
        let ou = OuParams::new(1.0 / 6.0, 0.2, spec)?;
        let mut cfg = JensenConfig::new(0.0, 1.0, 10_000, 11)?;
        cfg.surface_paths = 500;
        let r = jensen_gap(&model, &ou, (0.0, 0.2), &cfg)?;
        println!(
            "{spec:?}: E[f] = {:.6}, L(E f) = {:.6}, gap = {:.3e} +- {:.1e}",
            r.mean_certainty.mean, r.operator_of_mean.mean, r.gap.mean, r.gap.std_error
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
