//! Runs every example end to end.

#[allow(dead_code)]
#[path = "../examples/factor_paths.rs"]
mod factor_paths;

#[allow(dead_code)]
#[path = "../examples/figure2_scenario.rs"]
mod figure2_scenario;

#[allow(dead_code)]
#[path = "../examples/fixed_point_oracle.rs"]
mod fixed_point_oracle;

#[allow(dead_code)]
#[path = "../examples/jensen_gap.rs"]
mod jensen_gap;

#[allow(dead_code)]
#[path = "../examples/laplace_exponent.rs"]
mod laplace_exponent;

#[allow(dead_code)]
#[path = "../examples/log_strategy.rs"]
mod log_strategy;

#[allow(dead_code)]
#[path = "../examples/power_strategy.rs"]
mod power_strategy;

#[allow(dead_code)]
#[path = "../examples/regimes_and_q.rs"]
mod regimes_and_q;

#[allow(dead_code)]
#[path = "../examples/run_config.rs"]
mod run_config;

#[allow(dead_code)]
#[path = "../examples/solve_pide.rs"]
mod solve_pide;

#[test]
fn factor_paths() {
    factor_paths::run_example().unwrap();
}

#[test]
fn figure2_scenario() {
    figure2_scenario::run_example().unwrap();
}

#[test]
fn fixed_point_oracle() {
    fixed_point_oracle::run_example().unwrap();
}

#[test]
fn jensen_gap() {
    jensen_gap::run_example().unwrap();
}

#[test]
fn laplace_exponent() {
    laplace_exponent::run_example().unwrap();
}

#[test]
fn log_strategy() {
    log_strategy::run_example().unwrap();
}

#[test]
fn power_strategy() {
    power_strategy::run_example().unwrap();
}

#[test]
fn regimes_and_q() {
    regimes_and_q::run_example().unwrap();
}

#[test]
fn run_config() {
    run_config::run_example().unwrap();
}

#[test]
fn solve_pide() {
    solve_pide::run_example().unwrap();
}
