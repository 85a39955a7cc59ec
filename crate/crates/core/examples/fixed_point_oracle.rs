//! Monte Carlo check that the solved surface is a fixed point of the
//! Feynman–Kac operator, and a look at the contraction it satisfies.

use levy_merton::oracle::{apply_operator, contraction_suite, McConfig};
use levy_merton::pide;
use levy_merton::{MarketModel, OuParams, Result, SolverGrid, SubordinatorSpec};

pub fn run_example() -> Result<()> {
    let model = MarketModel::bns_example();
    let ou = OuParams::new(1.0 / 6.0, 0.2, SubordinatorSpec::compound_poisson_exp(0.5, 15.0)?)?;
    let sol = pide::solve(&model, &ou, &SolverGrid::new(2000, 200, 2.0))?;

    let mut cfg = McConfig::new(5_000, 7, model.horizon());
    cfg.probe_points = vec![(0.0, 0.2), (0.5, 0.5), (0.75, 0.1)];
    for p in apply_operator(&sol.surface, &model, &ou, &cfg)? {
        let f = sol.surface.interpolate(p.t, p.y);
        println!(
            "(t, y) = ({}, {}): Lf = {:.6} +- {:.1e}, f = {:.6}, z = {:+.2}",
            p.t,
            p.y,
            p.estimate,
            p.std_error,
            f,
            (p.estimate - f) / p.std_error
        );
    }

    cfg.n_paths = 1_000;
    for s in contraction_suite(&model, &ou, &cfg, 3)? {
        println!(
            "d(phi, xi) = {:.4e}, d(L phi, L xi) = {:.4e}, modulus {:.4}, holds {}",
            s.input_distance,
            s.output_distance,
            s.modulus,
            s.holds()
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
