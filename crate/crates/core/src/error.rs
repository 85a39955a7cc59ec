use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("interval [{start}, {end}] is reversed")]
    ReversedInterval { start: f64, end: f64 },

    #[error("interval [{start}, {end}] lies outside the path window [{window_start}, {window_end}]")]
    OutsideWindow {
        start: f64,
        end: f64,
        window_start: f64,
        window_end: f64,
    },

    #[error("factor level must be positive, got {0}")]
    NonPositiveLevel(f64),

    #[error("condition B violated: psi({threshold}) is infinite (jump rate {jump_rate})")]
    ConditionBViolated { threshold: f64, jump_rate: f64 },

    #[error("CFL violated: dt * rate = {number:.6} exceeds {limit}")]
    CflViolated { number: f64, limit: f64 },

    #[error("scaling kappa = {kappa} must exceed B'' = {b_double}")]
    KappaTooSmall { kappa: f64, b_double: f64 },

    #[error("growth bound `{bound}` fails at y = {y}: value {value} exceeds {limit}")]
    GrowthViolation {
        bound: &'static str,
        y: f64,
        value: f64,
        limit: f64,
    },

    #[error("precondition f<1: value {value} at (t = {t}, y = {y})")]
    BelowUnitFloor { t: f64, y: f64, value: f64 },

    #[error("surfaces are defined on different lattices")]
    LatticeMismatch,

    #[error("surface range exceeded beyond extrapolation budget: Y = {level} > {limit}")]
    RangeExceeded { level: f64, limit: f64 },

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, name: &'static str, reason: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: reason(),
        })
    }
}
