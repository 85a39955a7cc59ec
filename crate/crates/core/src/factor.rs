//! Exact simulation of the OU factor `dY = -λ Y(t-) dt + dL(λ t)`.
//!
//! Between jumps of the subordinator the factor decays exactly
//! exponentially, so a path is stored as its start level plus the list of
//! jumps of `L(λ ·)`, and every evaluation or time integral is done in
//! closed form piece by piece. Each jump enters at its own time and decays
//! from there:
//!
//! ```text
//! Y(u) = y e^{-λ (u - t)} + Σ_{τ_i ≤ u} e^{-λ (u - τ_i)} z_i
//! ```

use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::error::{ensure, Error, Result};
use crate::levy::SubordinatorSpec;
use crate::market::MarketModel;
use crate::quad;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuParams {
    /// Reversion rate `λ`; also the clock speed of the driving subordinator.
    pub reversion: f64,
    pub initial_level: f64,
    pub subordinator: SubordinatorSpec,
}

impl OuParams {
    pub fn new(reversion: f64, initial_level: f64, subordinator: SubordinatorSpec) -> Result<Self> {
        ensure(reversion.is_finite() && reversion > 0.0, "ou.lambda", || {
            format!("must be finite and > 0, got {reversion}")
        })?;
        ensure(
            initial_level.is_finite() && initial_level > 0.0,
            "ou.y0",
            || format!("must be finite and > 0, got {initial_level}"),
        )?;
        Ok(Self {
            reversion,
            initial_level,
            subordinator,
        })
    }

    pub fn with_initial_level(mut self, y: f64) -> Self {
        self.initial_level = y;
        self
    }

    pub fn with_subordinator(mut self, subordinator: SubordinatorSpec) -> Self {
        self.subordinator = subordinator;
        self
    }
}

/// A jump of `u ↦ L(λ u)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub size: f64,
}

/// Segment of a path between consecutive jumps. `level` is the
/// right-continuous value at `start`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    pub level: f64,
}

impl Piece {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorPath {
    start: f64,
    end: f64,
    initial_level: f64,
    reversion: f64,
    jumps: Vec<JumpEvent>,
}

impl FactorPath {
    /// Samples the factor on `[t, s]` from `Y(t) = ou.initial_level`.
    pub fn evolve<R: Rng + ?Sized>(ou: &OuParams, t: f64, s: f64, rng: &mut R) -> Result<Self> {
        Self::evolve_from(ou, t, ou.initial_level, s, rng)
    }

    /// Samples the factor on `[t, s]` from `Y(t) = y`.
    pub fn evolve_from<R: Rng + ?Sized>(
        ou: &OuParams,
        t: f64,
        y: f64,
        s: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if s < t {
            return Err(Error::ReversedInterval { start: t, end: s });
        }
        let jumps = ou.subordinator.sample_jumps(t, s, ou.reversion, rng)?;
        Self::with_jumps(ou.reversion, t, y, s, jumps)
    }

    /// Builds a path from an explicit jump list, bypassing the random
    /// stream. Jumps must be strictly ordered, positive and inside `(t, s]`.
    pub fn with_jumps(reversion: f64, t: f64, y: f64, s: f64, jumps: Vec<JumpEvent>) -> Result<Self> {
        if s < t {
            return Err(Error::ReversedInterval { start: t, end: s });
        }
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::NonPositiveLevel(y));
        }
        ensure(reversion > 0.0, "ou.lambda", || format!("must be > 0, got {reversion}"))?;
        let mut prev = t;
        for (k, j) in jumps.iter().enumerate() {
            ensure(j.size > 0.0 && j.size.is_finite(), "jump.size", || {
                format!("jump {k} has non-positive size {}", j.size)
            })?;
            ensure(j.time > prev && j.time <= s, "jump.time", || {
                format!("jump {k} at {} is out of order or outside ({t}, {s}]", j.time)
            })?;
            prev = j.time;
        }
        Ok(Self {
            start: t,
            end: s,
            initial_level: y,
            reversion,
            jumps,
        })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn initial_level(&self) -> f64 {
        self.initial_level
    }

    pub fn reversion(&self) -> f64 {
        self.reversion
    }

    pub fn jumps(&self) -> &[JumpEvent] {
        &self.jumps
    }

    /// Right-continuous value `Y(u)`; `u` is clamped to the path window.
    pub fn level(&self, u: f64) -> f64 {
        let u = u.clamp(self.start, self.end);
        let lam = self.reversion;
        let mut y = self.initial_level * (-lam * (u - self.start)).exp();
        for j in self.jumps.iter().take_while(|j| j.time <= u) {
            y += j.size * (-lam * (u - j.time)).exp();
        }
        y
    }

    /// Left limit `Y(u-)`.
    pub fn level_before(&self, u: f64) -> f64 {
        let u = u.clamp(self.start, self.end);
        let lam = self.reversion;
        let mut y = self.initial_level * (-lam * (u - self.start)).exp();
        for j in self.jumps.iter().take_while(|j| j.time < u) {
            y += j.size * (-lam * (u - j.time)).exp();
        }
        y
    }

    /// `L(λ b) - L(λ a)`: total jump size with times in `(a, b]`.
    pub fn jump_mass(&self, a: f64, b: f64) -> f64 {
        self.jumps
            .iter()
            .filter(|j| j.time > a && j.time <= b)
            .map(|j| j.size)
            .sum()
    }

    fn check_window(&self, a: f64, b: f64) -> Result<()> {
        if b < a {
            return Err(Error::ReversedInterval { start: a, end: b });
        }
        if a < self.start || b > self.end {
            return Err(Error::OutsideWindow {
                start: a,
                end: b,
                window_start: self.start,
                window_end: self.end,
            });
        }
        Ok(())
    }

    /// Inter-jump pieces covering `[a, b]`. The caller guarantees the
    /// interval lies in the window.
    pub fn pieces(&self, a: f64, b: f64) -> Vec<Piece> {
        let mut out = Vec::with_capacity(self.jumps.len() + 1);
        self.for_each_piece(a, b, |p| out.push(p));
        out
    }

    pub(crate) fn for_each_piece(&self, a: f64, b: f64, mut f: impl FnMut(Piece)) {
        let lam = self.reversion;
        let mut start = a;
        let mut level = self.level(a);
        for j in self.jumps.iter().filter(|j| j.time > a && j.time < b) {
            f(Piece {
                start,
                end: j.time,
                level,
            });
            level = level * (-lam * (j.time - start)).exp() + j.size;
            start = j.time;
        }
        f(Piece {
            start,
            end: b,
            level,
        });
    }

    /// `∫_a^b Y(u) du`, exact piece by piece.
    pub fn integrated_level(&self, a: f64, b: f64) -> Result<f64> {
        self.check_window(a, b)?;
        if a == b {
            return Ok(0.0);
        }
        let lam = self.reversion;
        let mut total = 0.0;
        self.for_each_piece(a, b, |p| {
            total += p.level * -(-lam * p.len()).exp_m1() / lam;
        });
        Ok(total)
    }

    /// `∫_a^b Q(Y(u)) du` by composite Simpson on each inter-jump piece,
    /// with sub-intervals no longer than `substep`.
    pub fn integrated_q(&self, model: &MarketModel, a: f64, b: f64, substep: f64) -> Result<f64> {
        self.check_window(a, b)?;
        ensure(substep > 0.0, "substep", || format!("must be > 0, got {substep}"))?;
        if a == b {
            return Ok(0.0);
        }
        let lam = self.reversion;
        let mut total = 0.0;
        let mut values = Vec::new();
        self.for_each_piece(a, b, |p| {
            if p.is_empty() {
                return;
            }
            let n = quad::even_intervals(p.len(), substep);
            let h = p.len() / n as f64;
            values.clear();
            values.extend((0..=n).map(|k| model.q(p.level * (-lam * h * k as f64).exp())));
            total += quad::simpson(&values, h);
        });
        Ok(total)
    }

    /// Writes `u,Y` sampled at `n_points` equally spaced times.
    pub fn write_csv(&self, path: &Path, n_points: usize) -> Result<()> {
        let n = n_points.max(2);
        let mut out = String::from("u,Y\n");
        for k in 0..n {
            let u = self.start + (self.end - self.start) * k as f64 / (n - 1) as f64;
            out.push_str(&format!("{:.16e},{:.16e}\n", u, self.level(u)));
        }
        crate::cli::write_atomic(path, out.as_bytes())
    }

    /// Writes the jump list as `tau,z`.
    pub fn write_jumps_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "tau,z")?;
        for j in &self.jumps {
            writeln!(out, "{:.16e},{:.16e}", j.time, j.size)?;
        }
        crate::cli::write_atomic(path, &out)
    }
}

/// Reads a `tau,z` jump list (header optional).
pub fn read_jumps_csv(path: &Path) -> Result<Vec<JumpEvent>> {
    let text = std::fs::read_to_string(path)?;
    parse_jumps_csv(&text)
}

pub fn parse_jumps_csv(text: &str) -> Result<Vec<JumpEvent>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (k == 0 && line.starts_with("tau")) {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let parse = |s: Option<&str>| -> Result<f64> {
            s.and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| Error::Config {
                line: k + 1,
                reason: format!("expected `tau,z`, got `{line}`"),
            })
        };
        let time = parse(parts.next())?;
        let size = parse(parts.next())?;
        out.push(JumpEvent { time, size });
    }
    Ok(out)
}
