//! Optimal investment and consumption for a power-utility agent in a
//! Black–Scholes market whose coefficients are driven by a
//! subordinator-driven Ornstein–Uhlenbeck factor.
//!
//! The crate is organised bottom-up:
//!
//! - [`levy`]: subordinator models, Laplace exponent, jump sampling and the
//!   integrability gate on the Lévy measure.
//! - [`factor`]: exact event-driven simulation of the OU factor `Y`.
//! - [`market`]: coefficient functions, the regime-wise `Q` function, the
//!   optimal fraction and all derived growth constants.
//! - [`pide`]: explicit upwind finite-difference solver for the reduced value
//!   function `f(t, y)`.
//! - [`oracle`]: Monte Carlo Feynman–Kac operator, fixed-point iteration,
//!   weighted-sup metric, the constant-coefficient closed form and the
//!   pathwise-certainty (Jensen gap) comparison.
//! - [`strategy`]: wealth-path simulation under the optimal power and log
//!   utility strategies, and realised utility.
//! - [`cli`]: config ingestion and the `solve` / `verify` / `simulate`
//!   orchestration used by the `levy-merton` binary.
//!
//! See `examples/` for one runnable program per capability.

pub mod cli;
pub mod error;
pub mod factor;
pub mod levy;
pub mod market;
pub mod oracle;
pub mod pide;
pub mod quad;
pub mod stats;
pub mod strategy;
pub mod surface;

pub use error::{Error, Result};
pub use factor::{FactorPath, JumpEvent, OuParams};
pub use levy::{ExtReal, SubordinatorSpec};
pub use market::{DerivedConstants, GrowthConstants, MarketModel, Regime};
pub use pide::{SolverGrid, Solution};
pub use surface::{Lattice, ValueFunction, ValueSurface};
