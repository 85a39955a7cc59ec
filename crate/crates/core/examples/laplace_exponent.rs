//! Laplace exponent of the compound Poisson subordinator and the
//! integrability gate on the Lévy measure.

use levy_merton::levy::check_condition_b;
use levy_merton::{MarketModel, OuParams, Result, SubordinatorSpec};

pub fn run_example() -> Result<()> {
    let jumps = SubordinatorSpec::compound_poisson_exp(0.5, 15.0)?;
    println!("w      psi(w)");
    for w in [0.0, 1.0, 5.0, 10.0, 14.0, 15.0, 20.0] {
        println!("{w:<6} {}", jumps.laplace_exponent(w));
    }
    println!("mean jump mass {:.6}, second moment {:.6}", jumps.mean(), jumps.second_moment());

    let model = MarketModel::bns_example();
    for eta in [15.0, 1.0] {
        let ou = OuParams::new(1.0 / 6.0, 0.2, SubordinatorSpec::compound_poisson_exp(0.5, eta)?)?;
        let gate = check_condition_b(&ou, &model, 0.1);
        println!(
            "eta = {eta:>4}: threshold {:.4}, psi {}, {}",
            gate.threshold,
            gate.psi,
            if gate.passed { "passes" } else { "fails" }
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
