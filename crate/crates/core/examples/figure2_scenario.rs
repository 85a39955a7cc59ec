//! Forced factor jumps at t = 0.05 and t = 0.65: the consumption rate under
//! stochastic volatility against the frozen-coefficient benchmark.

use levy_merton::levy::stream_rng;
use levy_merton::pide;
use levy_merton::strategy::{simulate_constant_vol, simulate_power_on, Noise};
use levy_merton::{FactorPath, JumpEvent, MarketModel, OuParams, Result, SolverGrid, SubordinatorSpec};

pub fn run_example() -> Result<()> {
    let model = MarketModel::bns_example();
    let ou = OuParams::new(1.0 / 6.0, 0.2, SubordinatorSpec::compound_poisson_exp(0.5, 15.0)?)?;
    let surface = pide::solve(&model, &ou, &SolverGrid::new(2000, 200, 2.0))?.surface;
    let jumps = vec![JumpEvent { time: 0.05, size: 0.12 }, JumpEvent { time: 0.65, size: 0.07 }];
    let factor = FactorPath::with_jumps(ou.reversion, 0.0, 0.2, 1.0, jumps)?;
    let noise = Noise::with_factor(factor, 2000, &mut stream_rng(1, 0))?;
    let sv = simulate_power_on(&surface, &model, &noise, 1.0)?;
    let cv = simulate_constant_vol(&model, &noise, 1.0)?;
    println!("t       Y(t-)   c/X stochastic  c/X constant");
    for k in [0, 99, 100, 101, 102, 600, 1300, 1301, 1302, 1800, 2000] {
        println!(
            "{:<7.4} {:<7.4} {:<15.6} {:.6}",
            sv.times[k], sv.levels_before[k], sv.consumption_ratio[k], cv.consumption_ratio[k]
        );
    }
    let dir = std::env::temp_dir().join("levy-merton-examples");
    sv.write_csv(&dir.join("stochastic_vol.csv"))?;
    cv.write_csv(&dir.join("constant_vol.csv"))?;
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
