//! Subordinators: Lévy measure family, Laplace exponent, the integrability
//! gate on the measure, and exact jump sampling.
//!
//! Only finite-activity drivers are modelled. A compound Poisson process
//! with exponential jumps has Lévy measure `ν(dz) = c η e^{-η z} dz` and
//! Laplace exponent `ψ(w) = c w / (η - w)` for `w < η`; beyond `η` the
//! exponential moment does not exist and `ψ` is reported as infinite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};

use crate::error::{ensure, Error, Result};
use crate::factor::{JumpEvent, OuParams};
use crate::market::MarketModel;

/// Seeded random stream used throughout the crate.
pub type Stream = ChaCha8Rng;

/// Stream `k` of a master seed.
///
/// Streams are ChaCha8 generators keyed by the master seed, with the
/// 64-bit ChaCha stream id set to `k`. Distinct `k` give independent,
/// non-overlapping sequences, so work units can run in any order.
pub fn stream_rng(master: u64, k: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(k);
    rng
}

/// Extended real used for Laplace exponents.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInfinity,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInfinity => None,
        }
    }

    /// Lossy view as `f64`, mapping the infinite value to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl std::fmt::Display for ExtReal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInfinity => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SubordinatorSpec {
    /// Compound Poisson with jump intensity `intensity` per unit time and
    /// exponential jump sizes of mean `1 / jump_rate`.
    CompoundPoissonExp { intensity: f64, jump_rate: f64 },
    /// The zero subordinator.
    Null,
}

impl SubordinatorSpec {
    pub fn compound_poisson_exp(intensity: f64, jump_rate: f64) -> Result<Self> {
        ensure(intensity.is_finite() && intensity >= 0.0, "subordinator.intensity", || {
            format!("must be finite and >= 0, got {intensity}")
        })?;
        ensure(jump_rate.is_finite() && jump_rate > 0.0, "subordinator.jump_rate", || {
            format!("must be finite and > 0, got {jump_rate}")
        })?;
        Ok(Self::CompoundPoissonExp {
            intensity,
            jump_rate,
        })
    }

    /// `ψ(w) = ∫ (e^{wz} - 1) ν(dz)`.
    pub fn laplace_exponent(&self, w: f64) -> ExtReal {
        match *self {
            SubordinatorSpec::Null => ExtReal::Finite(0.0),
            SubordinatorSpec::CompoundPoissonExp {
                intensity,
                jump_rate,
            } => {
                if w >= jump_rate {
                    ExtReal::PosInfinity
                } else {
                    ExtReal::Finite(intensity * w / (jump_rate - w))
                }
            }
        }
    }

    /// Total mass `ν((0, ∞))`.
    pub fn total_mass(&self) -> f64 {
        match *self {
            SubordinatorSpec::Null => 0.0,
            SubordinatorSpec::CompoundPoissonExp { intensity, .. } => intensity,
        }
    }

    /// `E[L(1)] = ψ'(0) = ∫ z ν(dz)`.
    pub fn mean(&self) -> f64 {
        match *self {
            SubordinatorSpec::Null => 0.0,
            SubordinatorSpec::CompoundPoissonExp {
                intensity,
                jump_rate,
            } => intensity / jump_rate,
        }
    }

    /// `∫ z^2 ν(dz)`; finite for every member of the family.
    pub fn second_moment(&self) -> f64 {
        match *self {
            SubordinatorSpec::Null => 0.0,
            SubordinatorSpec::CompoundPoissonExp {
                intensity,
                jump_rate,
            } => 2.0 * intensity / (jump_rate * jump_rate),
        }
    }

    /// Largest `w̄` with `ψ(w) < ∞` for all `w < w̄`.
    pub fn exponential_moment_bound(&self) -> f64 {
        match *self {
            SubordinatorSpec::Null => f64::INFINITY,
            SubordinatorSpec::CompoundPoissonExp { jump_rate, .. } => jump_rate,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, SubordinatorSpec::Null) || self.total_mass() == 0.0
    }

    /// Jumps of `u ↦ L(clock_scale · u)` on `(a, b]`.
    ///
    /// The count is Poisson with mean `c · clock_scale · (b - a)`, the times
    /// are i.i.d. uniform on the interval (then sorted) and the sizes are
    /// i.i.d. exponential with rate `η`.
    pub fn sample_jumps<R: Rng + ?Sized>(
        &self,
        a: f64,
        b: f64,
        clock_scale: f64,
        rng: &mut R,
    ) -> Result<Vec<JumpEvent>> {
        if b < a {
            return Err(Error::ReversedInterval { start: a, end: b });
        }
        ensure(clock_scale > 0.0, "clock_scale", || {
            format!("must be > 0, got {clock_scale}")
        })?;
        let (intensity, jump_rate) = match *self {
            SubordinatorSpec::Null => return Ok(Vec::new()),
            SubordinatorSpec::CompoundPoissonExp {
                intensity,
                jump_rate,
            } => (intensity, jump_rate),
        };
        let mean = intensity * clock_scale * (b - a);
        if mean <= 0.0 {
            return Ok(Vec::new());
        }
        let count = Poisson::new(mean)
            .expect("positive finite Poisson mean")
            .sample(rng) as usize;
        if count == 0 {
            return Ok(Vec::new());
        }
        let sizes = Exp::new(jump_rate).expect("positive jump rate");
        let mut times: Vec<f64> = (0..count)
            .map(|_| b - (b - a) * rng.random::<f64>())
            .collect();
        times.sort_by(f64::total_cmp);
        Ok(times
            .into_iter()
            .map(|time| JumpEvent {
                time,
                size: sizes.sample(rng).max(f64::MIN_POSITIVE),
            })
            .collect())
    }
}

/// Outcome of the integrability gate on the Lévy measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionB {
    /// `w* = 2 (1 + γ/2) (B' ∨ B'_σ) + ε`.
    pub threshold: f64,
    pub psi: ExtReal,
    pub epsilon: f64,
    pub passed: bool,
}

impl ConditionB {
    /// Distance from the threshold to the edge of the exponential-moment
    /// domain; negative when the gate fails.
    pub fn margin(&self, spec: &SubordinatorSpec) -> f64 {
        spec.exponential_moment_bound() - self.threshold
    }
}

/// Checks that `ψ` is finite at `2 (1 + γ/2) (B' ∨ B'_σ) + ε`.
pub fn check_condition_b(ou: &OuParams, model: &MarketModel, epsilon: f64) -> ConditionB {
    let gamma = model.gamma();
    let g = model.growth();
    let b_prime = gamma * g.effective_b() / ou.reversion;
    let b_sigma_prime = gamma * g.b_sigma / ou.reversion;
    let threshold = 2.0 * (1.0 + gamma / 2.0) * b_prime.max(b_sigma_prime) + epsilon;
    let psi = ou.subordinator.laplace_exponent(threshold);
    ConditionB {
        threshold,
        psi,
        epsilon,
        passed: psi.is_finite(),
    }
}
