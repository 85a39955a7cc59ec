//! Grid functions on `[t_start, t_end] × [y_first, y_last]` with bilinear
//! interpolation and exponential extrapolation in `y`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{ensure, Error, Result};

/// Anything that can be evaluated at `(t, y)`.
pub trait ValueFunction {
    fn value(&self, t: f64, y: f64) -> f64;

    /// Smallest value over the stored support, when the function has one.
    fn stored_minimum(&self) -> Option<f64> {
        None
    }
}

impl<F: Fn(f64, f64) -> f64> ValueFunction for F {
    fn value(&self, t: f64, y: f64) -> f64 {
        self(t, y)
    }
}

/// A uniform tensor lattice. Time nodes are `t_start + i Δt` for
/// `i = 0..=t_steps`; space nodes are `y_first + j Δy` for `j < y_count`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lattice {
    pub t_start: f64,
    pub t_end: f64,
    pub t_steps: usize,
    pub y_first: f64,
    pub y_step: f64,
    pub y_count: usize,
}

impl Lattice {
    pub fn new(t_start: f64, t_end: f64, t_steps: usize, y_first: f64, y_step: f64, y_count: usize) -> Result<Self> {
        ensure(t_end > t_start, "lattice.t", || format!("need t_start < t_end, got [{t_start}, {t_end}]"))?;
        ensure(t_steps >= 1, "lattice.t_steps", || "need at least one time step".into())?;
        ensure(y_first > 0.0, "lattice.y_first", || format!("must be > 0, got {y_first}"))?;
        ensure(y_step > 0.0, "lattice.y_step", || format!("must be > 0, got {y_step}"))?;
        ensure(y_count >= 2, "lattice.y_count", || "need at least two space nodes".into())?;
        Ok(Self {
            t_start,
            t_end,
            t_steps,
            y_first,
            y_step,
            y_count,
        })
    }

    /// Lattice spanning `[y_first, y_last]` with `y_count` nodes.
    pub fn spanning(t_start: f64, t_end: f64, t_steps: usize, y_first: f64, y_last: f64, y_count: usize) -> Result<Self> {
        ensure(y_last > y_first && y_count >= 2, "lattice.y", || {
            format!("need y_first < y_last and two nodes, got [{y_first}, {y_last}] with {y_count}")
        })?;
        Self::new(t_start, t_end, t_steps, y_first, (y_last - y_first) / (y_count - 1) as f64, y_count)
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.t_steps as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        if i == self.t_steps {
            self.t_end
        } else {
            self.t_start + i as f64 * self.dt()
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_first + j as f64 * self.y_step
    }

    pub fn y_last(&self) -> f64 {
        self.y(self.y_count - 1)
    }

    pub fn t_count(&self) -> usize {
        self.t_steps + 1
    }

    pub fn len(&self) -> usize {
        self.t_count() * self.y_count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        (0..self.t_count())
            .flat_map(move |i| (0..self.y_count).map(move |j| (i, j, self.t(i), self.y(j))))
    }
}

/// Values on a [`Lattice`], stored row-major with one row per time node.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueSurface {
    lattice: Lattice,
    values: Vec<f64>,
    growth_rate: f64,
}

impl ValueSurface {
    /// `growth_rate` is the exponential rate used beyond the last `y` node.
    pub fn new(lattice: Lattice, values: Vec<f64>, growth_rate: f64) -> Result<Self> {
        ensure(values.len() == lattice.len(), "surface.values", || {
            format!("expected {} values, got {}", lattice.len(), values.len())
        })?;
        Ok(Self {
            lattice,
            values,
            growth_rate,
        })
    }

    pub fn from_fn(lattice: Lattice, growth_rate: f64, f: impl ValueFunction) -> Self {
        let values = lattice.nodes().map(|(_, _, t, y)| f.value(t, y)).collect();
        Self {
            lattice,
            values,
            growth_rate,
        }
    }

    pub fn constant(lattice: Lattice, value: f64) -> Self {
        Self {
            lattice,
            values: vec![value; lattice.len()],
            growth_rate: 0.0,
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn growth_rate(&self) -> f64 {
        self.growth_rate
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.lattice.y_count + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.lattice.y_count;
        &self.values[i * n..(i + 1) * n]
    }

    pub fn map(&self, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let values = self
            .lattice
            .nodes()
            .zip(&self.values)
            .map(|((_, _, t, y), &v)| f(t, y, v))
            .collect();
        Self {
            lattice: self.lattice,
            values,
            growth_rate: self.growth_rate,
        }
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn check_same_lattice(&self, other: &Self) -> Result<()> {
        if self.lattice == other.lattice {
            Ok(())
        } else {
            Err(Error::LatticeMismatch)
        }
    }

    fn row_value(&self, i: usize, y: f64) -> f64 {
        let l = &self.lattice;
        let row = self.row(i);
        let last = l.y_count - 1;
        if y <= l.y_first {
            return row[0];
        }
        let x = (y - l.y_first) / l.y_step;
        if x >= last as f64 {
            return row[last] * (self.growth_rate * (y - l.y_last())).exp();
        }
        let j = x as usize;
        let w = x - j as f64;
        row[j] + w * (row[j + 1] - row[j])
    }

    /// Bilinear inside the lattice, flat in `t` outside it, flat below
    /// `y_first` and `f(t, y_last) e^{ρ (y - y_last)}` above `y_last`.
    pub fn interpolate(&self, t: f64, y: f64) -> f64 {
        let l = &self.lattice;
        let s = ((t - l.t_start) / l.dt()).clamp(0.0, l.t_steps as f64);
        let i = (s as usize).min(l.t_steps - 1);
        let w = s - i as f64;
        let lo = self.row_value(i, y);
        if w == 0.0 {
            return lo;
        }
        let hi = self.row_value(i + 1, y);
        lo + w * (hi - lo)
    }

    /// Writes `t,y,f,consumption_rate` with `consumption_rate = f^{-1/(1-γ)}`.
    pub fn write_csv(&self, path: &Path, gamma: f64) -> Result<()> {
        crate::cli::write_atomic(path, self.to_csv(gamma).as_bytes())
    }

    pub fn to_csv(&self, gamma: f64) -> String {
        let mut out = String::with_capacity(self.values.len() * 96);
        out.push_str("t,y,f,consumption_rate\n");
        let p = -1.0 / (1.0 - gamma);
        for ((_, _, t, y), &f) in self.lattice.nodes().zip(&self.values) {
            let _ = writeln!(out, "{t:.16e},{y:.16e},{f:.16e},{:.16e}", f.powf(p));
        }
        out
    }
}

impl ValueFunction for ValueSurface {
    fn value(&self, t: f64, y: f64) -> f64 {
        self.interpolate(t, y)
    }

    fn stored_minimum(&self) -> Option<f64> {
        Some(self.min_value())
    }
}
