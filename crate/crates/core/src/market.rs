//! Market coefficients, the regime-wise function `Q`, the optimal fraction
//! and the growth constants that control every bound downstream.

use std::fmt;
use std::sync::Arc;

use crate::error::{ensure, Error, Result};
use crate::factor::OuParams;
use crate::levy::SubordinatorSpec;

/// Floor substituted for `B` when the supplied growth rate is zero.
pub const B_FLOOR: f64 = 1e-3;
/// Floor substituted for `C` and `D` in the constant `a`.
pub const CD_FLOOR: f64 = 1e-6;
pub const DEFAULT_ALPHA_MARGIN: f64 = 1.0;
pub const DEFAULT_CONDITION_B_EPSILON: f64 = 0.1;

/// A coefficient function of the factor level together with its derivative.
pub trait Coefficient: Send + Sync {
    fn value(&self, y: f64) -> f64;
    fn derivative(&self, y: f64) -> f64;

    /// The affine form, when the coefficient has one. Used to serialise
    /// configs.
    fn as_affine(&self) -> Option<Affine> {
        None
    }
}

/// `intercept + slope * y`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine {
    pub intercept: f64,
    pub slope: f64,
}

impl Affine {
    pub const fn new(intercept: f64, slope: f64) -> Self {
        Self { intercept, slope }
    }

    pub const fn constant(value: f64) -> Self {
        Self::new(value, 0.0)
    }
}

impl Coefficient for Affine {
    fn value(&self, y: f64) -> f64 {
        self.intercept + self.slope * y
    }

    fn derivative(&self, _y: f64) -> f64 {
        self.slope
    }

    fn as_affine(&self) -> Option<Affine> {
        Some(*self)
    }
}

impl fmt::Display for Affine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}*y", self.intercept, self.slope)
    }
}

/// A coefficient given by two closures.
pub struct FnCoefficient<F, G> {
    value: F,
    derivative: G,
}

impl<F, G> FnCoefficient<F, G>
where
    F: Fn(f64) -> f64 + Send + Sync,
    G: Fn(f64) -> f64 + Send + Sync,
{
    pub fn new(value: F, derivative: G) -> Self {
        Self { value, derivative }
    }
}

impl<F, G> Coefficient for FnCoefficient<F, G>
where
    F: Fn(f64) -> f64 + Send + Sync,
    G: Fn(f64) -> f64 + Send + Sync,
{
    fn value(&self, y: f64) -> f64 {
        (self.value)(y)
    }

    fn derivative(&self, y: f64) -> f64 {
        (self.derivative)(y)
    }
}

/// Linear growth constants of the coefficients, of `Q` and of `dQ/dy`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct GrowthConstants {
    pub a_r: f64,
    pub b_r: f64,
    pub a_mu: f64,
    pub b_mu: f64,
    pub a_sigma: f64,
    pub b_sigma: f64,
    /// `Q(y) ≤ A + B y`.
    pub a: f64,
    pub b: f64,
    /// `|Q'(y)| ≤ C + D y`.
    pub c: f64,
    pub d: f64,
}

impl GrowthConstants {
    /// Constants implied by affine coefficients on `y > 0`.
    pub fn for_affine(r: Affine, mu: Affine, sigma2: Affine, gamma: f64) -> Self {
        let up = |c: Affine| (c.intercept.max(0.0), c.slope.max(0.0));
        let (a_r, b_r) = up(r);
        let (a_mu, b_mu) = up(mu);
        let (a_sigma, b_sigma) = up(sigma2);
        Self {
            a_r,
            b_r,
            a_mu,
            b_mu,
            a_sigma,
            b_sigma,
            a: a_r.max(a_mu),
            b: b_r.max(b_mu),
            c: (mu.slope - r.slope).abs() + (1.0 - gamma) * sigma2.slope.abs() / 2.0 + r.slope.abs(),
            d: 0.0,
        }
    }

    pub fn effective_b(&self) -> f64 {
        if self.b > 0.0 {
            self.b
        } else {
            B_FLOOR
        }
    }

    pub fn effective_c(&self) -> f64 {
        self.c.max(CD_FLOOR)
    }

    pub fn effective_d(&self) -> f64 {
        self.d.max(CD_FLOOR)
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("growth.A_r", self.a_r),
            ("growth.B_r", self.b_r),
            ("growth.A_mu", self.a_mu),
            ("growth.B_mu", self.b_mu),
            ("growth.A_sigma", self.a_sigma),
            ("growth.B_sigma", self.b_sigma),
            ("growth.A", self.a),
            ("growth.B", self.b),
            ("growth.C", self.c),
            ("growth.D", self.d),
        ];
        for (name, v) in fields {
            ensure(v.is_finite() && v >= 0.0, name, || {
                format!("must be finite and >= 0, got {v}")
            })?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `μ < r`: stay out of the stock.
    D1,
    /// Interior optimum.
    D2,
    /// Borrowing constraint binds: everything in the stock.
    D3,
    Boundary12,
    Boundary23,
}

#[derive(Clone)]
pub struct MarketModel {
    r: Arc<dyn Coefficient>,
    mu: Arc<dyn Coefficient>,
    sigma2: Arc<dyn Coefficient>,
    gamma: f64,
    horizon: f64,
    growth: GrowthConstants,
}

impl fmt::Debug for MarketModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |c: &Arc<dyn Coefficient>| match c.as_affine() {
            Some(a) => a.to_string(),
            None => "<fn>".to_string(),
        };
        f.debug_struct("MarketModel")
            .field("r", &show(&self.r))
            .field("mu", &show(&self.mu))
            .field("sigma2", &show(&self.sigma2))
            .field("gamma", &self.gamma)
            .field("horizon", &self.horizon)
            .field("growth", &self.growth)
            .finish()
    }
}

impl MarketModel {
    pub fn new(
        r: Arc<dyn Coefficient>,
        mu: Arc<dyn Coefficient>,
        sigma2: Arc<dyn Coefficient>,
        gamma: f64,
        horizon: f64,
        growth: GrowthConstants,
    ) -> Result<Self> {
        ensure(gamma > 0.0 && gamma < 1.0, "market.gamma", || {
            format!("must lie in (0, 1), got {gamma}")
        })?;
        ensure(horizon.is_finite() && horizon > 0.0, "market.horizon", || {
            format!("must be finite and > 0, got {horizon}")
        })?;
        growth.validate()?;
        Ok(Self {
            r,
            mu,
            sigma2,
            gamma,
            horizon,
            growth,
        })
    }

    /// Affine coefficients; `growth = None` uses [`GrowthConstants::for_affine`].
    pub fn affine(
        r: Affine,
        mu: Affine,
        sigma2: Affine,
        gamma: f64,
        horizon: f64,
        growth: Option<GrowthConstants>,
    ) -> Result<Self> {
        let growth = growth.unwrap_or_else(|| GrowthConstants::for_affine(r, mu, sigma2, gamma));
        Self::new(Arc::new(r), Arc::new(mu), Arc::new(sigma2), gamma, horizon, growth)
    }

    /// `T = 1`, `γ = 0.75`, `r ≡ 0`, `μ(y) = 0.1 + 0.5 y`, `σ²(y) = y`.
    pub fn bns_example() -> Self {
        let growth = GrowthConstants {
            a_r: 0.0,
            b_r: 0.0,
            a_mu: 0.1,
            b_mu: 0.5,
            a_sigma: 0.0,
            b_sigma: 1.0,
            a: 0.1,
            b: 0.375,
            c: 0.375,
            d: 0.0,
        };
        Self::affine(
            Affine::constant(0.0),
            Affine::new(0.1, 0.5),
            Affine::new(0.0, 1.0),
            0.75,
            1.0,
            Some(growth),
        )
        .expect("preset is valid")
    }

    /// Constant coefficients `r = 0`, `μ = 0.1`, `σ² = 0.25`, `γ = 0.5`,
    /// `T = 1`, for which `Q ≡ 0.04`.
    pub fn merton_constant() -> Self {
        Self::affine(
            Affine::constant(0.0),
            Affine::constant(0.1),
            Affine::constant(0.25),
            0.5,
            1.0,
            None,
        )
        .expect("preset is valid")
    }

    /// The same market with coefficients frozen at level `y0`.
    pub fn frozen_at(&self, y0: f64) -> Result<Self> {
        check_level(y0)?;
        let r = Affine::constant(self.r(y0));
        let mu = Affine::constant(self.mu(y0));
        let sigma2 = Affine::constant(self.sigma2(y0));
        Self::affine(r, mu, sigma2, self.gamma, self.horizon, None)
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        let mut m = self.clone();
        ensure(horizon.is_finite() && horizon > 0.0, "market.horizon", || {
            format!("must be finite and > 0, got {horizon}")
        })?;
        m.horizon = horizon;
        Ok(m)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn growth(&self) -> &GrowthConstants {
        &self.growth
    }

    pub fn r(&self, y: f64) -> f64 {
        self.r.value(y)
    }

    pub fn mu(&self, y: f64) -> f64 {
        self.mu.value(y)
    }

    pub fn sigma2(&self, y: f64) -> f64 {
        self.sigma2.value(y)
    }

    pub fn r_coefficient(&self) -> &Arc<dyn Coefficient> {
        &self.r
    }

    pub fn mu_coefficient(&self) -> &Arc<dyn Coefficient> {
        &self.mu
    }

    pub fn sigma2_coefficient(&self) -> &Arc<dyn Coefficient> {
        &self.sigma2
    }

    /// True when every coefficient is constant in `y`.
    pub fn is_constant(&self) -> bool {
        [&self.r, &self.mu, &self.sigma2]
            .iter()
            .all(|c| c.as_affine().is_some_and(|a| a.slope == 0.0))
    }

    fn regime_at(&self, y: f64) -> Regime {
        let (r, mu) = (self.r(y), self.mu(y));
        let excess = mu - r;
        let tol = 1e-12 * (1.0 + mu.abs() + r.abs());
        if excess.abs() <= tol {
            return Regime::Boundary12;
        }
        if excess < 0.0 {
            return Regime::D1;
        }
        let risk = (1.0 - self.gamma) * self.sigma2(y);
        if (risk - excess).abs() <= tol {
            Regime::Boundary23
        } else if risk > excess {
            Regime::D2
        } else {
            Regime::D3
        }
    }

    pub fn classify_regime(&self, y: f64) -> Result<Regime> {
        check_level(y)?;
        Ok(self.regime_at(y))
    }

    /// `Q(y)` without the domain check; callers guarantee `y > 0`.
    pub fn q(&self, y: f64) -> f64 {
        let r = self.r(y);
        match self.regime_at(y) {
            Regime::D1 => r,
            Regime::D3 => self.mu(y) - (1.0 - self.gamma) * self.sigma2(y) / 2.0,
            Regime::D2 | Regime::Boundary12 | Regime::Boundary23 => {
                let excess = self.mu(y) - r;
                excess * excess / (2.0 * (1.0 - self.gamma) * self.sigma2(y)) + r
            }
        }
    }

    pub fn q_value(&self, y: f64) -> Result<f64> {
        check_level(y)?;
        Ok(self.q(y))
    }

    /// `dQ/dy`, written in terms of `σ²` and its derivative.
    pub fn q_derivative(&self, y: f64) -> Result<f64> {
        check_level(y)?;
        let g = self.gamma;
        let dr = self.r.derivative(y);
        Ok(match self.regime_at(y) {
            Regime::D1 => dr,
            Regime::D3 => self.mu.derivative(y) - (1.0 - g) * self.sigma2.derivative(y) / 2.0,
            Regime::D2 | Regime::Boundary12 | Regime::Boundary23 => {
                let excess = self.mu(y) - self.r(y);
                let d_excess = self.mu.derivative(y) - dr;
                let s2 = self.sigma2(y);
                excess * d_excess / ((1.0 - g) * s2)
                    - excess * excess * self.sigma2.derivative(y) / (2.0 * (1.0 - g) * s2 * s2)
                    + dr
            }
        })
    }

    /// `π̂(y)`: the maximiser of `π(μ - r) - π²(1 - γ)σ²/2` on `[0, 1]`.
    pub fn fraction(&self, y: f64) -> f64 {
        match self.regime_at(y) {
            Regime::D1 | Regime::Boundary12 => 0.0,
            Regime::D3 | Regime::Boundary23 => 1.0,
            Regime::D2 => {
                let v = (self.mu(y) - self.r(y)) / ((1.0 - self.gamma) * self.sigma2(y));
                v.clamp(0.0, 1.0)
            }
        }
    }

    pub fn optimal_fraction(&self, y: f64) -> Result<f64> {
        check_level(y)?;
        Ok(self.fraction(y))
    }

    /// Maximiser of `π(μ - r) - π²σ²/2` on `[0, 1]`, the log-utility fraction.
    pub fn log_fraction(&self, y: f64) -> f64 {
        ((self.mu(y) - self.r(y)) / self.sigma2(y)).clamp(0.0, 1.0)
    }

    /// Checks the growth constants and `σ² > 0` at 10⁴ points of `(0, 4 y_max]`.
    pub fn check_growth(&self, y_max: f64) -> Result<()> {
        ensure(y_max > 0.0, "grid.y_max", || format!("must be > 0, got {y_max}"))?;
        const N: usize = 10_000;
        let g = &self.growth;
        let upper = 4.0 * y_max;
        for k in 1..=N {
            let y = upper * k as f64 / N as f64;
            let tol = |limit: f64| 1e-12 * (1.0 + limit.abs());
            let check = |bound: &'static str, value: f64, limit: f64| -> Result<()> {
                if value > limit + tol(limit) || !value.is_finite() {
                    Err(Error::GrowthViolation {
                        bound,
                        y,
                        value,
                        limit,
                    })
                } else {
                    Ok(())
                }
            };
            let (r, mu, s2) = (self.r(y), self.mu(y), self.sigma2(y));
            check("growth.A_r", r, g.a_r + g.b_r * y)?;
            check("growth.A_mu", mu, g.a_mu + g.b_mu * y)?;
            check("growth.A_sigma", s2, g.a_sigma + g.b_sigma * y)?;
            check("market.r", -r, 0.0)?;
            check("market.sigma2", -s2, -f64::MIN_POSITIVE)?;
            check("growth.A", self.q(y), g.a + g.b * y)?;
            let dq = self.q_derivative(y)?.abs();
            check("growth.C", dq, g.c + g.d * y)?;
        }
        Ok(())
    }
}

fn check_level(y: f64) -> Result<()> {
    if y > 0.0 && y.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveLevel(y))
    }
}

/// Constants derived from the growth constants and the Laplace exponent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivedConstants {
    pub gamma: f64,
    pub reversion: f64,
    pub horizon: f64,
    /// `B' = γB/λ`.
    pub b_prime: f64,
    /// `A' = γA + λψ(B')`.
    pub a_prime: f64,
    /// `B'' = B'(1 + γ/4)`.
    pub b_double: f64,
    /// `A'' = γA + λψ(B'')`.
    pub a_double: f64,
    /// `B'_σ = γB_σ/λ`.
    pub b_sigma_prime: f64,
    /// Constant of the linear ODE for `φ`.
    pub a: f64,
    /// Weight rate of the metric.
    pub alpha: f64,
}

pub fn derive_constants(model: &MarketModel, ou: &OuParams, alpha_margin: f64) -> Result<DerivedConstants> {
    ensure(alpha_margin.is_finite() && alpha_margin > 0.0, "metric.alpha_margin", || {
        format!("must be finite and > 0, got {alpha_margin}")
    })?;
    let gamma = model.gamma();
    let lam = ou.reversion;
    let g = model.growth();
    let psi = |w: f64| -> Result<f64> {
        ou.subordinator.laplace_exponent(w).finite().ok_or(Error::ConditionBViolated {
            threshold: w,
            jump_rate: jump_rate(&ou.subordinator),
        })
    };
    let b_prime = gamma * g.effective_b() / lam;
    let b_double = b_prime * (1.0 + gamma / 4.0);
    let b_sigma_prime = gamma * g.b_sigma / lam;
    let threshold = 2.0 * (1.0 + gamma / 2.0) * b_prime.max(b_sigma_prime);
    psi(threshold)?;
    let a_prime = gamma * g.a + lam * psi(b_prime)?;
    let a_double = gamma * g.a + lam * psi(b_double)?;
    ensure(a_prime > 0.0, "growth.A", || {
        format!("A' = {a_prime} must be > 0; supply A > 0 or a nonzero subordinator")
    })?;
    let a = (1.0 / lam)
        * (1.0 + (1.0 - gamma) / a_double)
        * (4.0 * g.effective_d() / b_prime).max(g.effective_c() * gamma);
    Ok(DerivedConstants {
        gamma,
        reversion: lam,
        horizon: model.horizon(),
        b_prime,
        a_prime,
        b_double,
        a_double,
        b_sigma_prime,
        a,
        alpha: a_prime + gamma + alpha_margin,
    })
}

fn jump_rate(spec: &SubordinatorSpec) -> f64 {
    spec.exponential_moment_bound()
}

impl DerivedConstants {
    /// `(1 + (1-γ)/A') e^{A'(T-t) + B'y}`.
    pub fn envelope_upper(&self, t: f64, y: f64) -> f64 {
        (1.0 + (1.0 - self.gamma) / self.a_prime)
            * (self.a_prime * (self.horizon - t) + self.b_prime * y).exp()
    }

    /// Solution of `φ' + (γ - λ)φ + λa = 0`, `φ(T) = a`.
    pub fn phi_bound(&self, t: f64) -> f64 {
        let (g, lam, a) = (self.gamma, self.reversion, self.a);
        let tau = self.horizon - t;
        let k = g - lam;
        if k.abs() < 1e-12 {
            a * (1.0 + lam * tau)
        } else {
            (a + lam * a / k) * (k * tau).exp() - lam * a / k
        }
    }

    /// Bound `φ(t) e^{A''(T-t) + B''y}` on `|∂f/∂y|`.
    pub fn derivative_envelope(&self, t: f64, y: f64) -> f64 {
        self.phi_bound(t) * (self.a_double * (self.horizon - t) + self.b_double * y).exp()
    }

    /// `γ / (α - A')`.
    pub fn contraction_modulus(&self) -> f64 {
        self.gamma / (self.alpha - self.a_prime)
    }
}
