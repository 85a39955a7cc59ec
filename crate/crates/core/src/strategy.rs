//! Wealth paths under a consumption–investment policy.
//!
//! Wealth is never stepped with an Euler scheme. With `π` the stock fraction
//! and `κ = c/X` the consumption rate per unit wealth,
//!
//! ```text
//! log X(t) = log x + ∫_0^t [π(μ - r) + r - κ - π²σ²/2] ds + ∫_0^t π σ dW
//! ```
//!
//! The `ds` integral runs Simpson over the inter-jump pieces of each step,
//! and the stochastic integral uses left-point values, so `X` stays positive
//! by construction.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure, Error, Result};
use crate::factor::{FactorPath, JumpEvent, OuParams};
use crate::levy::{stream_rng, Stream, SubordinatorSpec};
use crate::market::MarketModel;
use crate::oracle::merton_closed_form;
use crate::quad;
use crate::stats::Estimate;
use crate::surface::ValueSurface;

pub const DEFAULT_STEPS: usize = 2000;

/// A feedback rule in `(t, Y(t-))`.
pub trait Policy {
    fn fraction(&self, t: f64, y: f64) -> f64;
    /// Consumption per unit of wealth.
    fn consumption_rate(&self, t: f64, y: f64) -> f64;
}

/// `π̂(y)` and `ĉ/x = f̂(t, y)^{-1/(1-γ)}`.
pub struct PowerOptimal<'a> {
    pub surface: &'a ValueSurface,
    pub model: &'a MarketModel,
}

impl Policy for PowerOptimal<'_> {
    fn fraction(&self, _t: f64, y: f64) -> f64 {
        self.model.fraction(y)
    }

    fn consumption_rate(&self, t: f64, y: f64) -> f64 {
        self.surface.interpolate(t, y).powf(-1.0 / (1.0 - self.model.gamma()))
    }
}

/// The log-utility rule: the myopic fraction and `c/X = 1/(1 + T - t)`.
pub struct LogOptimal<'a> {
    pub model: &'a MarketModel,
}

impl Policy for LogOptimal<'_> {
    fn fraction(&self, _t: f64, y: f64) -> f64 {
        self.model.log_fraction(y)
    }

    fn consumption_rate(&self, t: f64, _y: f64) -> f64 {
        1.0 / (1.0 + self.model.horizon() - t)
    }
}

/// Nothing consumed, everything in the bank account.
pub struct BankOnly;

impl Policy for BankOnly {
    fn fraction(&self, _t: f64, _y: f64) -> f64 {
        0.0
    }

    fn consumption_rate(&self, _t: f64, _y: f64) -> f64 {
        0.0
    }
}

/// Constant-volatility optimum: coefficients frozen at `y0`, consumption
/// from the constant-`Q` closed form.
pub struct FrozenMerton {
    pub q: f64,
    pub fraction: f64,
    pub gamma: f64,
    pub horizon: f64,
}

impl FrozenMerton {
    pub fn new(model: &MarketModel, y0: f64) -> Self {
        Self {
            q: model.q(y0),
            fraction: model.fraction(y0),
            gamma: model.gamma(),
            horizon: model.horizon(),
        }
    }
}

impl Policy for FrozenMerton {
    fn fraction(&self, _t: f64, _y: f64) -> f64 {
        self.fraction
    }

    fn consumption_rate(&self, t: f64, _y: f64) -> f64 {
        merton_closed_form(self.q, self.gamma, self.horizon, t).powf(-1.0 / (1.0 - self.gamma))
    }
}

/// The eight alternatives the optimal power policy is compared with.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Perturbation {
    ConsumptionScaled(f64),
    FractionShifted(f64),
    FractionScaled(f64),
    NoStock,
    /// `c/X` held at its level at `t = 0`.
    ConstantRate,
    /// Consumption of the frozen-coefficient model at `Y(0)`.
    FrozenMertonRate,
    /// Consumption `1/(1 + T - t)`.
    LogRule,
}

impl Perturbation {
    pub fn all() -> [Perturbation; 8] {
        [
            Perturbation::ConsumptionScaled(0.8),
            Perturbation::ConsumptionScaled(1.25),
            Perturbation::FractionShifted(-0.2),
            Perturbation::FractionScaled(0.5),
            Perturbation::NoStock,
            Perturbation::ConstantRate,
            Perturbation::FrozenMertonRate,
            Perturbation::LogRule,
        ]
    }

    pub fn name(&self) -> String {
        match self {
            Perturbation::ConsumptionScaled(k) => format!("c x {k}"),
            Perturbation::FractionShifted(d) => format!("pi {d:+} clamped"),
            Perturbation::FractionScaled(k) => format!("pi x {k}"),
            Perturbation::NoStock => "pi = 0".into(),
            Perturbation::ConstantRate => "c/X constant at t=0".into(),
            Perturbation::FrozenMertonRate => "frozen-coefficient c/X".into(),
            Perturbation::LogRule => "c/X = 1/(1+T-t)".into(),
        }
    }
}

/// The optimal power policy with one perturbation applied.
pub struct Perturbed<'a> {
    base: PowerOptimal<'a>,
    kind: Perturbation,
    initial_rate: f64,
    frozen: FrozenMerton,
}

impl<'a> Perturbed<'a> {
    pub fn new(base: PowerOptimal<'a>, kind: Perturbation, y0: f64) -> Self {
        let initial_rate = base.consumption_rate(0.0, y0);
        let frozen = FrozenMerton::new(base.model, y0);
        Self {
            base,
            kind,
            initial_rate,
            frozen,
        }
    }
}

impl Policy for Perturbed<'_> {
    fn fraction(&self, t: f64, y: f64) -> f64 {
        let pi = self.base.fraction(t, y);
        match self.kind {
            Perturbation::FractionShifted(d) => (pi + d).clamp(0.0, 1.0),
            Perturbation::FractionScaled(k) => (pi * k).clamp(0.0, 1.0),
            Perturbation::NoStock => 0.0,
            _ => pi,
        }
    }

    fn consumption_rate(&self, t: f64, y: f64) -> f64 {
        match self.kind {
            Perturbation::ConsumptionScaled(k) => k * self.base.consumption_rate(t, y),
            Perturbation::ConstantRate => self.initial_rate,
            Perturbation::FrozenMertonRate => self.frozen.consumption_rate(t, y),
            Perturbation::LogRule => 1.0 / (1.0 + self.base.model.horizon() - t),
            _ => self.base.consumption_rate(t, y),
        }
    }
}

/// The randomness behind one wealth path: a factor path on `[0, T]` and the
/// Brownian increments of a uniform grid.
#[derive(Clone, Debug)]
pub struct Noise {
    pub factor: FactorPath,
    pub increments: Vec<f64>,
}

impl Noise {
    /// Factor path first, then the `n_steps` Gaussian increments.
    pub fn sample<R: Rng + ?Sized>(ou: &OuParams, horizon: f64, n_steps: usize, rng: &mut R) -> Result<Self> {
        let factor = FactorPath::evolve(ou, 0.0, horizon, rng)?;
        Self::with_factor(factor, n_steps, rng)
    }

    pub fn with_factor<R: Rng + ?Sized>(factor: FactorPath, n_steps: usize, rng: &mut R) -> Result<Self> {
        ensure(n_steps >= 2 && n_steps.is_multiple_of(2), "simulate.n_steps", || {
            format!("must be even and >= 2, got {n_steps}")
        })?;
        let sd = ((factor.end() - factor.start()) / n_steps as f64).sqrt();
        let increments = (0..n_steps)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                sd * z
            })
            .collect::<Vec<f64>>();
        Ok(Self { factor, increments })
    }
}

/// Joint path of the factor, wealth and controls on a uniform grid.
#[derive(Clone, Debug)]
pub struct StrategyPath {
    pub times: Vec<f64>,
    /// `Y(t_k)`.
    pub levels: Vec<f64>,
    /// `Y(t_k-)`, the level the controls see.
    pub levels_before: Vec<f64>,
    pub wealth: Vec<f64>,
    pub consumption: Vec<f64>,
    pub fraction: Vec<f64>,
    pub consumption_ratio: Vec<f64>,
    pub increments: Vec<f64>,
    pub jumps: Vec<JumpEvent>,
}

impl StrategyPath {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,Y,X,c,pi,c_over_X\n");
        for k in 0..self.times.len() {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[k],
                self.levels[k],
                self.wealth[k],
                self.consumption[k],
                self.fraction[k],
                self.consumption_ratio[k]
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::cli::write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn terminal_wealth(&self) -> f64 {
        *self.wealth.last().unwrap()
    }
}

fn max_level(path: &FactorPath) -> f64 {
    path.pieces(path.start(), path.end())
        .iter()
        .map(|p| p.level)
        .fold(path.initial_level(), f64::max)
}

/// Runs `policy` on the given noise.
pub fn simulate_with_policy(policy: &dyn Policy, model: &MarketModel, noise: &Noise, x0: f64) -> Result<StrategyPath> {
    ensure(x0.is_finite() && x0 > 0.0, "simulate.wealth", || format!("must be > 0, got {x0}"))?;
    let path = &noise.factor;
    let n = noise.increments.len();
    let (t0, t1) = (path.start(), path.end());
    let dt = (t1 - t0) / n as f64;
    let lam = path.reversion();
    let drift = |s: f64, y: f64| {
        let pi = policy.fraction(s, y);
        let (r, mu, s2) = (model.r(y), model.mu(y), model.sigma2(y));
        pi * (mu - r) + r - policy.consumption_rate(s, y) - 0.5 * pi * pi * s2
    };
    let mut out = StrategyPath {
        times: Vec::with_capacity(n + 1),
        levels: Vec::with_capacity(n + 1),
        levels_before: Vec::with_capacity(n + 1),
        wealth: Vec::with_capacity(n + 1),
        consumption: Vec::with_capacity(n + 1),
        fraction: Vec::with_capacity(n + 1),
        consumption_ratio: Vec::with_capacity(n + 1),
        increments: noise.increments.clone(),
        jumps: path.jumps().to_vec(),
    };
    let mut log_x = x0.ln();
    let mut carry: Option<(f64, f64)> = None;
    for k in 0..=n {
        let t = if k == n { t1 } else { t0 + k as f64 * dt };
        let y_left = if k == 0 { path.initial_level() } else { path.level_before(t) };
        let x = log_x.exp();
        let pi = policy.fraction(t, y_left);
        let rate = policy.consumption_rate(t, y_left);
        out.times.push(t);
        out.levels.push(path.level(t));
        out.levels_before.push(y_left);
        out.wealth.push(x);
        out.fraction.push(pi);
        out.consumption_ratio.push(rate);
        out.consumption.push(rate * x);
        if k == n {
            break;
        }
        let next = if k + 1 == n { t1 } else { t0 + (k + 1) as f64 * dt };
        let mut integral = 0.0;
        let jump_at_node = path.jumps().iter().any(|j| j.time == t);
        path.for_each_piece(t, next, |p| {
            if p.is_empty() {
                return;
            }
            let h = p.len() / 2.0;
            let f0 = match carry {
                Some((s, v)) if s == p.start && !jump_at_node => v,
                _ => drift(p.start, p.level),
            };
            let f1 = drift(p.start + h, p.level * (-lam * h).exp());
            let f2 = drift(p.end, p.level * (-lam * p.len()).exp());
            integral += h / 3.0 * (f0 + 4.0 * f1 + f2);
            carry = Some((p.end, f2));
        });
        let sigma = model.sigma2(y_left).max(0.0).sqrt();
        log_x += integral + pi * sigma * noise.increments[k];
    }
    Ok(out)
}

fn check_range(path: &FactorPath, surface: &ValueSurface) -> Result<()> {
    let limit = 2.0 * surface.lattice().y_last();
    let level = max_level(path);
    if level > limit {
        return Err(Error::RangeExceeded { level, limit });
    }
    Ok(())
}

/// One path under the optimal power-utility policy.
pub fn simulate_power(
    surface: &ValueSurface,
    model: &MarketModel,
    ou: &OuParams,
    n_steps: usize,
    x0: f64,
    rng: &mut Stream,
) -> Result<StrategyPath> {
    let noise = Noise::sample(ou, model.horizon(), n_steps, rng)?;
    simulate_power_on(surface, model, &noise, x0)
}

pub fn simulate_power_on(surface: &ValueSurface, model: &MarketModel, noise: &Noise, x0: f64) -> Result<StrategyPath> {
    check_range(&noise.factor, surface)?;
    simulate_with_policy(&PowerOptimal { surface, model }, model, noise, x0)
}

/// `∫ z² ν(dz)`, whose finiteness is the moment condition behind the
/// log-utility strategy.
pub fn check_moment_condition(spec: &SubordinatorSpec) -> Result<f64> {
    let m = spec.second_moment();
    ensure(m.is_finite(), "subordinator", || "second moment of the Levy measure is infinite".into())?;
    Ok(m)
}

/// One path under the log-utility policy.
pub fn simulate_log(model: &MarketModel, ou: &OuParams, n_steps: usize, x0: f64, rng: &mut Stream) -> Result<StrategyPath> {
    check_moment_condition(&ou.subordinator)?;
    let noise = Noise::sample(ou, model.horizon(), n_steps, rng)?;
    simulate_with_policy(&LogOptimal { model }, model, &noise, x0)
}

/// The same Brownian increments with the factor held at `Y(0)`.
pub fn frozen_noise(noise: &Noise) -> Result<Noise> {
    let f = &noise.factor;
    Ok(Noise {
        factor: FactorPath::with_jumps(f.reversion(), f.start(), f.initial_level(), f.end(), Vec::new())?,
        increments: noise.increments.clone(),
    })
}

/// The constant-volatility benchmark on the same Brownian increments:
/// coefficients frozen at `Y(0)` and consumption from the closed form.
pub fn simulate_constant_vol(model: &MarketModel, noise: &Noise, x0: f64) -> Result<StrategyPath> {
    let y0 = noise.factor.initial_level();
    let frozen = model.frozen_at(y0)?;
    simulate_with_policy(&FrozenMerton::new(&frozen, y0), &frozen, &frozen_noise(noise)?, x0)
}

/// `∫_0^T c^γ ds + X(T)^γ`, Simpson over the path grid.
pub fn utility_score(path: &StrategyPath, gamma: f64) -> f64 {
    let n = path.times.len() - 1;
    let h = (path.times[n] - path.times[0]) / n as f64;
    let running: Vec<f64> = path.consumption.iter().map(|c| c.powf(gamma)).collect();
    let integral = if n.is_multiple_of(2) {
        quad::simpson(&running, h)
    } else {
        running.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum()
    };
    integral + path.terminal_wealth().powf(gamma)
}

/// Paired comparison of the optimal policy with one perturbation.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationResult {
    pub name: String,
    /// Mean of `U(optimal) - U(perturbed)` over common paths.
    pub advantage: Estimate,
}

impl PerturbationResult {
    pub fn passes(&self) -> bool {
        self.advantage.mean >= -3.0 * self.advantage.std_error
    }
}

/// Realised utility of the optimal power policy against the eight
/// [`Perturbation::all`] alternatives on `n_paths` common paths; path `k`
/// uses stream `k` of `seed`.
pub fn optimality_probe(
    surface: &ValueSurface,
    model: &MarketModel,
    ou: &OuParams,
    n_paths: usize,
    n_steps: usize,
    x0: f64,
    seed: u64,
) -> Result<(Estimate, Vec<PerturbationResult>)> {
    let gamma = model.gamma();
    let kinds = Perturbation::all();
    let mut optimal = Vec::with_capacity(n_paths);
    let mut diffs = vec![Vec::with_capacity(n_paths); kinds.len()];
    for k in 0..n_paths {
        let mut rng = stream_rng(seed, k as u64);
        let noise = Noise::sample(ou, model.horizon(), n_steps, &mut rng)?;
        check_range(&noise.factor, surface)?;
        let base = utility_score(&simulate_power_on(surface, model, &noise, x0)?, gamma);
        optimal.push(base);
        for (d, kind) in diffs.iter_mut().zip(kinds) {
            let policy = Perturbed::new(PowerOptimal { surface, model }, kind, ou.initial_level);
            let alt = utility_score(&simulate_with_policy(&policy, model, &noise, x0)?, gamma);
            d.push(base - alt);
        }
    }
    let results = kinds
        .iter()
        .zip(&diffs)
        .map(|(kind, d)| PerturbationResult {
            name: kind.name(),
            advantage: Estimate::from_samples(d),
        })
        .collect();
    Ok((Estimate::from_samples(&optimal), results))
}
