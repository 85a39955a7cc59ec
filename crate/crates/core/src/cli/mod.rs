//! Command-line front end.
//!
//! Subcommands `solve`, `verify`, `simulate`, `laplace` and `constants` read a
//! [`RunConfig`] from `--config` and/or `--preset`, write CSV and SVG files
//! to the output directory and exit with 0 on success, 1 on a precondition
//! failure and 2 on a failed verification.

pub mod config;
pub mod svg;
mod verify;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::factor::{read_jumps_csv, FactorPath};
use crate::levy::{check_condition_b, stream_rng, ExtReal};
use crate::market::{derive_constants, MarketModel, DEFAULT_ALPHA_MARGIN};
use crate::pide::{self, consumption_surface};
use crate::strategy::{self, LogOptimal, Noise, StrategyPath};
use crate::surface::{Lattice, ValueSurface};

pub use config::{Issue, RunConfig, Utility};
pub use verify::{verify_surface, Check, VerifyReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PRECONDITION: i32 = 1;
pub const EXIT_VERIFICATION: i32 = 2;

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Parser, Debug)]
#[command(name = "levy-merton", version, about = "Optimal consumption and investment under OU stochastic volatility")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve for the value surface; write surface.csv, consumption.csv and figure1.svg.
    Solve(Common),
    /// Check a solved surface against the Monte Carlo oracle and the analytic bounds.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Verify this surface CSV instead of solving.
        #[arg(long, value_name = "PATH")]
        surface: Option<PathBuf>,
    },
    /// Simulate wealth and consumption paths.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        utility: Option<UtilityArg>,
        /// CSV `tau,z` of forced factor jumps.
        #[arg(long, value_name = "PATH")]
        scenario: Option<PathBuf>,
        /// Also simulate the frozen-coefficient benchmark and write figure2.svg.
        #[arg(long)]
        compare_constant_vol: bool,
        /// Use this surface CSV instead of solving.
        #[arg(long, value_name = "PATH")]
        surface: Option<PathBuf>,
    },
    /// Print the Laplace exponent table and the integrability gate.
    Laplace(Common),
    /// Print the derived constants.
    Constants(Common),
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum UtilityArg {
    Power,
    Log,
}

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    Precondition(Vec<Issue>),
    Verification(Vec<String>),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Precondition(_) => EXIT_PRECONDITION,
            Failure::Verification(_) => EXIT_VERIFICATION,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Precondition(vec![Issue::from_error(&e)])
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PRECONDITION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            match &f {
                Failure::Precondition(issues) => issues.iter().for_each(|i| eprintln!("error: {i}")),
                Failure::Verification(failed) => failed.iter().for_each(|c| eprintln!("FAILED: {c}")),
            }
            f.exit_code()
        }
    }
}

fn execute(command: Command) -> Outcome {
    match command {
        Command::Solve(common) => cmd_solve(&load(&common, &[], true)?),
        Command::Verify { common, surface } => cmd_verify(&load(&common, &[], true)?, surface.as_deref()),
        Command::Simulate {
            common,
            utility,
            scenario,
            compare_constant_vol,
            surface,
        } => {
            let extra = utility
                .map(|u| {
                    let name = if u == UtilityArg::Log { "log" } else { "power" };
                    vec![("simulate.utility".to_string(), name.to_string())]
                })
                .unwrap_or_default();
            let cfg = load(&common, &extra, true)?;
            cmd_simulate(&cfg, scenario.as_deref(), compare_constant_vol, surface.as_deref())
        }
        Command::Laplace(common) => cmd_laplace(&load(&common, &[], false)?),
        Command::Constants(common) => cmd_constants(&load(&common, &[], false)?),
    }
}

/// Reads the config file and flag overrides; with `check`, also runs every
/// cross-module precondition.
pub fn load(common: &Common, extra: &[(String, String)], check: bool) -> std::result::Result<RunConfig, Failure> {
    let mut issues = Vec::new();
    let text = match &common.config {
        Some(path) => std::fs::read_to_string(path).unwrap_or_else(|e| {
            issues.push(Issue {
                key: "--config".into(),
                line: None,
                reason: format!("{}: {e}", path.display()),
            });
            String::new()
        }),
        None => String::new(),
    };
    let mut overrides = Vec::new();
    if let Some(p) = &common.preset {
        overrides.push(("market.preset".to_string(), p.clone()));
    }
    if let Some(s) = common.seed {
        overrides.push(("mc.seed".to_string(), s.to_string()));
    }
    if let Some(o) = &common.out {
        overrides.push(("output.dir".to_string(), o.display().to_string()));
    }
    for kv in &common.set {
        match kv.split_once('=') {
            Some((k, v)) => overrides.push((k.trim().to_string(), v.trim().to_string())),
            None => issues.push(Issue {
                key: "--set".into(),
                line: None,
                reason: format!("expected KEY=VALUE, got `{kv}`"),
            }),
        }
    }
    overrides.extend_from_slice(extra);
    if common.config.is_none() && common.preset.is_none() && !common.set.iter().any(|s| s.starts_with("market.")) {
        issues.push(Issue {
            key: "market.preset".into(),
            line: None,
            reason: "give --config or --preset".into(),
        });
        return Err(Failure::Precondition(issues));
    }
    let cfg = match RunConfig::parse(&text, &overrides) {
        Ok(c) => c,
        Err(mut more) => {
            issues.append(&mut more);
            return Err(Failure::Precondition(issues));
        }
    };
    if check {
        issues.extend(cfg.check());
    }
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(Failure::Precondition(issues))
    }
}

/// `t,y,c_over_x` rows of a consumption surface.
pub fn consumption_csv(rate: &ValueSurface) -> String {
    let mut out = String::from("t,y,c_over_x\n");
    for ((_, _, t, y), v) in rate.lattice().nodes().zip(rate.values()) {
        let _ = writeln!(out, "{t:.16e},{y:.16e},{v:.16e}");
    }
    out
}

/// Reads the `t,y,f,...` layout written by `solve` back into a surface.
pub fn parse_surface_csv(text: &str, growth_rate: f64) -> Result<ValueSurface> {
    let bad = |line: usize, reason: &str| Error::Config {
        line,
        reason: reason.to_string(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.starts_with("t,y,f") => {}
        _ => return Err(bad(1, "expected header `t,y,f,...`")),
    }
    let mut rows = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split(',').map(|v| v.trim().parse::<f64>());
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(t)), Some(Ok(y)), Some(Ok(f))) => rows.push((t, y, f)),
            _ => return Err(bad(n + 1, "expected three numbers")),
        }
    }
    let t0 = rows.first().ok_or_else(|| bad(2, "no rows"))?.0;
    let y_count = rows.iter().take_while(|r| r.0 == t0).count();
    if y_count < 2 || rows.len() % y_count != 0 || rows.len() / y_count < 2 {
        return Err(bad(2, "rows do not form a lattice"));
    }
    let t_count = rows.len() / y_count;
    let lattice = Lattice::spanning(t0, rows[rows.len() - 1].0, t_count - 1, rows[0].1, rows[y_count - 1].1, y_count)?;
    for (k, ((_, _, t, y), r)) in lattice.nodes().zip(&rows).enumerate() {
        let tol = 1e-9 * (1.0 + t.abs() + y.abs());
        if (r.0 - t).abs() > tol || (r.1 - y).abs() > tol {
            return Err(bad(k + 2, "node does not lie on a uniform lattice"));
        }
    }
    ValueSurface::new(lattice, rows.iter().map(|r| r.2).collect(), growth_rate)
}

fn read_surface(path: &Path, model: &MarketModel, cfg: &RunConfig) -> std::result::Result<ValueSurface, Failure> {
    let ou = cfg.ou()?;
    let constants = derive_constants(model, &ou, DEFAULT_ALPHA_MARGIN)?;
    let text = std::fs::read_to_string(path).map_err(|e| {
        Failure::Precondition(vec![Issue {
            key: "--surface".into(),
            line: None,
            reason: format!("{}: {e}", path.display()),
        }])
    })?;
    parse_surface_csv(&text, constants.b_prime).map_err(|e| {
        Failure::Precondition(vec![Issue {
            key: "--surface".into(),
            line: None,
            reason: e.to_string(),
        }])
    })
}

fn cmd_solve(cfg: &RunConfig) -> Outcome {
    let model = cfg.model()?;
    let ou = cfg.ou()?;
    let sol = pide::solve(&model, &ou, &cfg.grid)?;
    let dir = &cfg.output_dir;
    let gamma = model.gamma();
    sol.surface.write_csv(&dir.join("surface.csv"), gamma)?;
    let rate = consumption_surface(&sol.surface, gamma);
    write_atomic(&dir.join("consumption.csv"), consumption_csv(&rate).as_bytes())?;
    let svg = svg::heatmap(&rate, "Optimal consumption rate c/x over (t, y)", 100);
    write_atomic(&dir.join("figure1.svg"), svg.as_bytes())?;
    println!("kappa = {}", sol.kappa);
    println!("cfl = {}", sol.cfl);
    println!("f(0, {}) = {}", cfg.y0, sol.surface.interpolate(0.0, cfg.y0));
    println!("wrote {}", dir.display());
    if sol.breaches.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(sol.breaches.iter().take(20).map(|b| b.to_string()).collect()))
    }
}

fn cmd_verify(cfg: &RunConfig, surface: Option<&Path>) -> Outcome {
    let model = cfg.model()?;
    let ou = cfg.ou()?;
    let surface = match surface {
        Some(p) => read_surface(p, &model, cfg)?,
        None => pide::solve(&model, &ou, &cfg.grid)?.surface,
    };
    let report = verify_surface(&surface, &model, &ou, cfg)?;
    let dir = &cfg.output_dir;
    write_atomic(&dir.join("verify.csv"), report.to_csv().as_bytes())?;
    crate::oracle::write_probes_csv(&dir.join("probes.csv"), &report.probes)?;
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Verification(
            report.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect(),
        ))
    }
}

fn scenario_noise(cfg: &RunConfig, scenario: Option<&[crate::factor::JumpEvent]>, k: usize) -> Result<Noise> {
    let ou = cfg.ou()?;
    let horizon = cfg.market.horizon;
    let mut rng = stream_rng(cfg.seed, k as u64);
    match scenario {
        Some(jumps) => {
            let factor = FactorPath::with_jumps(ou.reversion, 0.0, ou.initial_level, horizon, jumps.to_vec())?;
            Noise::with_factor(factor, cfg.simulate_steps, &mut rng)
        }
        None => Noise::sample(&ou, horizon, cfg.simulate_steps, &mut rng),
    }
}

fn cmd_simulate(cfg: &RunConfig, scenario: Option<&Path>, compare: bool, surface: Option<&Path>) -> Outcome {
    let model = cfg.model()?;
    let ou = cfg.ou()?;
    let jumps = scenario.map(read_jumps_csv).transpose()?;
    let solved = match (cfg.utility, surface) {
        (Utility::Log, _) => {
            strategy::check_moment_condition(&ou.subordinator)?;
            None
        }
        (Utility::Power, Some(p)) => Some(read_surface(p, &model, cfg)?),
        (Utility::Power, None) => Some(pide::solve(&model, &ou, &cfg.grid)?.surface),
    };
    let dir = &cfg.output_dir;
    let run = |model: &MarketModel, noise: &Noise| -> Result<StrategyPath> {
        match &solved {
            Some(s) => strategy::simulate_power_on(s, model, noise, cfg.wealth),
            None => strategy::simulate_with_policy(&LogOptimal { model }, model, noise, cfg.wealth),
        }
    };
    let mut first = None;
    for k in 0..cfg.simulate_paths.max(1) {
        let noise = scenario_noise(cfg, jumps.as_deref(), k)?;
        let path = run(&model, &noise)?;
        let name = if cfg.simulate_paths <= 1 { "path.csv".to_string() } else { format!("path_{k}.csv") };
        path.write_csv(&dir.join(name))?;
        println!(
            "path {k}: X(T) = {:.6}, utility = {:.6}, jumps = {}",
            path.terminal_wealth(),
            strategy::utility_score(&path, model.gamma()),
            path.jumps.len()
        );
        if k == 0 {
            first = Some((noise, path));
        }
    }
    if compare {
        let (noise, path) = first.expect("at least one path");
        let benchmark = match cfg.utility {
            Utility::Power => strategy::simulate_constant_vol(&model, &noise, cfg.wealth)?,
            Utility::Log => {
                let frozen = model.frozen_at(noise.factor.initial_level())?;
                strategy::simulate_with_policy(&LogOptimal { model: &frozen }, &frozen, &strategy::frozen_noise(&noise)?, cfg.wealth)?
            }
        };
        benchmark.write_csv(&dir.join("constant_vol.csv"))?;
        let series = [
            svg::Series {
                name: "stochastic vol",
                x: &path.times,
                y: &path.consumption_ratio,
                colour: "#c0392b",
            },
            svg::Series {
                name: "constant vol",
                x: &benchmark.times,
                y: &benchmark.consumption_ratio,
                colour: "#2c3e50",
            },
        ];
        let svg = svg::line_chart(&series, "Consumption rate c/X along one path", "t", "c/X");
        write_atomic(&dir.join("figure2.svg"), svg.as_bytes())?;
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_laplace(cfg: &RunConfig) -> Outcome {
    let model = cfg.model()?;
    let ou = cfg.ou()?;
    let gate = check_condition_b(&ou, &model, cfg.condition_b_epsilon);
    println!("w,psi");
    for k in 0..=20 {
        let w = gate.threshold * k as f64 / 10.0;
        match ou.subordinator.laplace_exponent(w) {
            ExtReal::Finite(v) => println!("{w},{v}"),
            ExtReal::PosInfinity => println!("{w},inf"),
        }
    }
    println!(
        "# condition B: threshold = {}, psi = {}, {}",
        gate.threshold,
        gate.psi,
        if gate.passed { "passed" } else { "FAILED" }
    );
    if gate.passed {
        Ok(())
    } else {
        Err(Error::ConditionBViolated {
            threshold: gate.threshold,
            jump_rate: ou.subordinator.exponential_moment_bound(),
        }
        .into())
    }
}

fn cmd_constants(cfg: &RunConfig) -> Outcome {
    let model = cfg.model()?;
    let ou = cfg.ou()?;
    let c = derive_constants(&model, &ou, DEFAULT_ALPHA_MARGIN)?;
    let g = model.growth();
    for (k, v) in [
        ("gamma", c.gamma),
        ("lambda", c.reversion),
        ("horizon", c.horizon),
        ("growth.A", g.a),
        ("growth.B", g.b),
        ("growth.C", g.c),
        ("growth.D", g.d),
        ("B_prime", c.b_prime),
        ("A_prime", c.a_prime),
        ("B_double", c.b_double),
        ("A_double", c.a_double),
        ("B_sigma_prime", c.b_sigma_prime),
        ("a", c.a),
        ("alpha", c.alpha),
        ("contraction_modulus", c.contraction_modulus()),
        ("kappa", cfg.grid.kappa_for(&c)),
        ("cfl", cfg.grid.cfl_number(&model, &ou)),
    ] {
        println!("{k} = {v}");
    }
    Ok(())
}
