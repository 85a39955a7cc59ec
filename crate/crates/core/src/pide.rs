//! Explicit upwind solver for the reduced value function.
//!
//! The unknown `f(t, y)` solves, backwards from `f(T, ·) = 1`,
//!
//! ```text
//! f_t - λ y f_y + λ ∫ (f(y+z) - f(y)) ν(dz) + γ Q(y) f + (1-γ) f^{-γ/(1-γ)} = 0
//! ```
//!
//! The march works on `g = f e^{-κ y}`. Every stencil weight carries the
//! factor `e^{κ (y_m - y_j)}` of the node it reads, so one step on `g` is the
//! same monotone upwind step on `f`, only expressed in a variable that
//! decays at the far boundary.

use crate::error::{Error, Result};
use crate::factor::OuParams;
use crate::levy::SubordinatorSpec;
use crate::market::{derive_constants, DerivedConstants, MarketModel, DEFAULT_ALPHA_MARGIN};
use crate::quad;
use crate::surface::{Lattice, ValueSurface};

pub const CFL_LIMIT: f64 = 0.9;
/// Relative slack allowed on the envelope bounds.
pub const BOUND_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverGrid {
    /// Number of time steps `M`.
    pub time_steps: usize,
    /// Number of space nodes `J`; nodes are `y_j = j Δy`, `j = 1..=J`.
    pub y_steps: usize,
    pub y_max: f64,
    /// Scaling rate; `None` means `B'' + 1`.
    pub kappa: Option<f64>,
    /// Gauss–Legendre nodes for the jump expectation.
    pub quad_nodes: usize,
}

impl Default for SolverGrid {
    fn default() -> Self {
        Self {
            time_steps: 8000,
            y_steps: 400,
            y_max: 2.0,
            kappa: None,
            quad_nodes: 32,
        }
    }
}

impl SolverGrid {
    pub fn new(time_steps: usize, y_steps: usize, y_max: f64) -> Self {
        Self {
            time_steps,
            y_steps,
            y_max,
            ..Self::default()
        }
    }

    pub fn dy(&self) -> f64 {
        self.y_max / self.y_steps as f64
    }

    pub fn lattice(&self, horizon: f64) -> Result<Lattice> {
        Lattice::new(0.0, horizon, self.time_steps, self.dy(), self.dy(), self.y_steps)
    }

    /// `Δt (λ y_max/Δy + λc + γ max_j Q(y_j) + 1)`.
    pub fn cfl_number(&self, model: &MarketModel, ou: &OuParams) -> f64 {
        let dt = model.horizon() / self.time_steps as f64;
        let lam = ou.reversion;
        let dy = self.dy();
        let q_max = (1..=self.y_steps)
            .map(|j| model.q(j as f64 * dy))
            .fold(0.0, f64::max);
        dt * (lam * self.y_max / dy + lam * ou.subordinator.total_mass() + model.gamma() * q_max + 1.0)
    }

    pub fn kappa_for(&self, constants: &DerivedConstants) -> f64 {
        self.kappa.unwrap_or(constants.b_double + 1.0)
    }

    fn validate(&self) -> Result<()> {
        crate::error::ensure(self.time_steps >= 1, "grid.time_steps", || "must be >= 1".into())?;
        crate::error::ensure(self.y_steps >= 2, "grid.y_steps", || "must be >= 2".into())?;
        crate::error::ensure(self.y_max.is_finite() && self.y_max > 0.0, "grid.y_max", || {
            format!("must be finite and > 0, got {}", self.y_max)
        })?;
        crate::error::ensure(self.quad_nodes >= 1, "grid.quad_nodes", || "must be >= 1".into())?;
        Ok(())
    }
}

/// One explicit backward step, precomputed for a fixed model and grid.
#[derive(Clone, Debug)]
pub struct Stepper {
    dt: f64,
    gamma: f64,
    /// `e^{κ y_j}`.
    scale: Vec<f64>,
    /// `Δt λ y_j / Δy`.
    drift: Vec<f64>,
    /// `e^{-κ Δy}`.
    shift: f64,
    /// `Δt γ Q(y_j)`.
    reaction: Vec<f64>,
    /// `Δt λ c`.
    jump_rate: f64,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
}

impl Stepper {
    pub fn new(model: &MarketModel, ou: &OuParams, grid: &SolverGrid, kappa: f64, extrapolation_rate: f64) -> Result<Self> {
        grid.validate()?;
        let n = grid.y_steps;
        let dy = grid.dy();
        let dt = model.horizon() / grid.time_steps as f64;
        let lam = ou.reversion;
        let y: Vec<f64> = (1..=n).map(|j| j as f64 * dy).collect();
        let mut offsets = vec![0];
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        let jump_rate = match ou.subordinator {
            SubordinatorSpec::CompoundPoissonExp {
                intensity,
                jump_rate: eta,
            } if intensity > 0.0 => {
                let (x, w) = quad::gauss_legendre(grid.quad_nodes);
                let z_cut = 12.0 / eta;
                let nodes: Vec<(f64, f64)> = x
                    .iter()
                    .zip(&w)
                    .map(|(&x, &w)| {
                        let z = (x + 1.0) * z_cut / 2.0;
                        (z, w * z_cut / 2.0 * eta * (-eta * z).exp())
                    })
                    .collect();
                let tail = (-eta * z_cut).exp() * eta / (eta - extrapolation_rate);
                let mut dense = vec![0.0; n];
                for &yj in &y {
                    dense.iter_mut().for_each(|v| *v = 0.0);
                    let mut add = |point: f64, w: f64| {
                        let s = point / dy - 1.0;
                        if s >= (n - 1) as f64 {
                            dense[n - 1] += w * (extrapolation_rate * (point - y[n - 1])).exp();
                        } else {
                            let m = s as usize;
                            let theta = s - m as f64;
                            dense[m] += w * (1.0 - theta);
                            dense[m + 1] += w * theta;
                        }
                    };
                    for &(z, w) in &nodes {
                        add(yj + z, w);
                    }
                    add(yj + z_cut, tail);
                    for (m, &v) in dense.iter().enumerate() {
                        if v != 0.0 {
                            cols.push(m);
                            weights.push(v * (kappa * (y[m] - yj)).exp());
                        }
                    }
                    offsets.push(cols.len());
                }
                dt * lam * intensity
            }
            _ => {
                offsets.resize(n + 1, 0);
                0.0
            }
        };
        Ok(Self {
            dt,
            gamma: model.gamma(),
            scale: y.iter().map(|&v| (kappa * v).exp()).collect(),
            drift: y.iter().map(|&v| dt * lam * v / dy).collect(),
            shift: (-kappa * dy).exp(),
            reaction: y.iter().map(|&v| dt * model.gamma() * model.q(v)).collect(),
            jump_rate,
            offsets,
            cols,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.scale.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scale.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One backward step on the scaled unknown `g`.
    pub fn step_scaled(&self, g: &[f64], out: &mut [f64]) {
        let p = self.gamma / (1.0 - self.gamma);
        let nonlinear = self.dt * (1.0 - self.gamma);
        for j in 0..g.len() {
            let gj = g[j];
            let mut next = gj;
            if j > 0 {
                next -= self.drift[j] * (gj - self.shift * g[j - 1]);
            }
            if self.jump_rate > 0.0 {
                let range = self.offsets[j]..self.offsets[j + 1];
                let e: f64 = self.cols[range.clone()]
                    .iter()
                    .zip(&self.weights[range])
                    .map(|(&m, &w)| w * g[m])
                    .sum();
                next += self.jump_rate * (e - gj);
            }
            next += self.reaction[j] * gj;
            let f = gj * self.scale[j];
            next += nonlinear * f.powf(-p) / self.scale[j];
            out[j] = next;
        }
    }

    /// One backward step on `f` itself.
    pub fn step(&self, f: &[f64], out: &mut [f64]) {
        let g: Vec<f64> = f.iter().zip(&self.scale).map(|(v, s)| v / s).collect();
        self.step_scaled(&g, out);
        out.iter_mut().zip(&self.scale).for_each(|(v, s)| *v *= s);
    }
}

/// A node where the solution leaves `[1, envelope]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Breach {
    pub i: usize,
    pub j: usize,
    pub t: f64,
    pub y: f64,
    pub value: f64,
    pub envelope: f64,
}

impl std::fmt::Display for Breach {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "envelope breach at node ({}, {}) t = {}, y = {}: f = {} outside [1, {}]",
            self.i, self.j, self.t, self.y, self.value, self.envelope
        )
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub surface: ValueSurface,
    pub constants: DerivedConstants,
    pub kappa: f64,
    pub cfl: f64,
    pub breaches: Vec<Breach>,
}

pub fn solve(model: &MarketModel, ou: &OuParams, grid: &SolverGrid) -> Result<Solution> {
    grid.validate()?;
    let constants = derive_constants(model, ou, DEFAULT_ALPHA_MARGIN)?;
    let cfl = grid.cfl_number(model, ou);
    if cfl > CFL_LIMIT {
        return Err(Error::CflViolated {
            number: cfl,
            limit: CFL_LIMIT,
        });
    }
    let kappa = grid.kappa_for(&constants);
    if kappa <= constants.b_double {
        return Err(Error::KappaTooSmall {
            kappa,
            b_double: constants.b_double,
        });
    }
    let stepper = Stepper::new(model, ou, grid, kappa, constants.b_prime)?;
    let lattice = grid.lattice(model.horizon())?;
    let n = grid.y_steps;
    let m = grid.time_steps;
    let mut values = vec![0.0; lattice.len()];
    values[m * n..].iter_mut().for_each(|v| *v = 1.0);
    let mut g: Vec<f64> = stepper.scale.iter().map(|s| 1.0 / s).collect();
    let mut next = vec![0.0; n];
    for i in (0..m).rev() {
        stepper.step_scaled(&g, &mut next);
        std::mem::swap(&mut g, &mut next);
        for ((v, gj), s) in values[i * n..(i + 1) * n].iter_mut().zip(&g).zip(&stepper.scale) {
            *v = gj * s;
        }
    }
    let surface = ValueSurface::new(lattice, values, constants.b_prime)?;
    let breaches = envelope_breaches(&surface, &constants);
    Ok(Solution {
        surface,
        constants,
        kappa,
        cfl,
        breaches,
    })
}

/// Nodes where `1 ≤ f ≤ envelope` fails by more than
/// [`BOUND_TOLERANCE`] times the envelope.
pub fn envelope_breaches(surface: &ValueSurface, constants: &DerivedConstants) -> Vec<Breach> {
    let lattice = *surface.lattice();
    lattice
        .nodes()
        .zip(surface.values())
        .filter_map(|((i, j, t, y), &value)| {
            let envelope = constants.envelope_upper(t, y);
            let slack = BOUND_TOLERANCE * envelope;
            (value < 1.0 - slack || value > envelope + slack || !value.is_finite()).then_some(Breach {
                i,
                j,
                t,
                y,
                value,
                envelope,
            })
        })
        .collect()
}

/// `ĉ/x = f^{-1/(1-γ)}` at every node.
pub fn consumption_surface(surface: &ValueSurface, gamma: f64) -> ValueSurface {
    let p = -1.0 / (1.0 - gamma);
    let rate = surface.growth_rate() * p;
    let values = surface.values().iter().map(|f| f.powf(p)).collect();
    ValueSurface::new(*surface.lattice(), values, rate).expect("same lattice")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeReport {
    pub checked: usize,
    pub within: usize,
    /// Largest `|∂f/∂y|` relative to its bound.
    pub worst_ratio: f64,
}

impl DerivativeReport {
    pub fn fraction_within(&self) -> f64 {
        if self.checked == 0 {
            1.0
        } else {
            self.within as f64 / self.checked as f64
        }
    }
}

/// Compares central differences of `f` in `y` with `φ(t) e^{A''(T-t) + B''y}`
/// at interior nodes, leaving out the two smallest `y` columns.
pub fn derivative_bound_check(surface: &ValueSurface, constants: &DerivedConstants) -> DerivativeReport {
    let l = *surface.lattice();
    let mut report = DerivativeReport {
        checked: 0,
        within: 0,
        worst_ratio: 0.0,
    };
    for i in 0..l.t_count() {
        let t = l.t(i);
        let row = surface.row(i);
        for j in 2..l.y_count - 1 {
            let d = (row[j + 1] - row[j - 1]) / (2.0 * l.y_step);
            let bound = constants.derivative_envelope(t, l.y(j));
            let ratio = d.abs() / bound;
            report.checked += 1;
            if ratio <= 1.0 {
                report.within += 1;
            }
            report.worst_ratio = report.worst_ratio.max(ratio);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::Affine;

    fn merton_ou() -> OuParams {
        OuParams::new(1.0 / 6.0, 0.2, SubordinatorSpec::Null).unwrap()
    }

    fn closed_form(q: f64, gamma: f64, tau: f64) -> f64 {
        let k = gamma * q / (1.0 - gamma);
        let u = if k == 0.0 {
            1.0 + tau
        } else {
            (1.0 + 1.0 / k) * (k * tau).exp() - 1.0 / k
        };
        u.powf(1.0 - gamma)
    }

    #[test]
    fn terminal_slice_is_one() {
        let grid = SolverGrid::new(200, 40, 2.0);
        let sol = solve(&MarketModel::bns_example(), &OuParams::new(1.0 / 6.0, 0.2, SubordinatorSpec::compound_poisson_exp(0.5, 15.0).unwrap()).unwrap(), &grid).unwrap();
        let l = *sol.surface.lattice();
        assert!(sol.surface.row(l.t_steps).iter().all(|&v| v == 1.0));
        assert!(sol.breaches.is_empty());
    }

    #[test]
    fn merton_column_matches_closed_form() {
        let sol = solve(&MarketModel::merton_constant(), &merton_ou(), &SolverGrid::new(2000, 200, 2.0)).unwrap();
        let l = *sol.surface.lattice();
        for i in (0..=l.t_steps).step_by(100) {
            let exact = closed_form(0.04, 0.5, 1.0 - l.t(i));
            for j in [0, 50, 199] {
                let v = sol.surface.get(i, j);
                assert!(((v - exact) / exact).abs() < 1e-4, "i = {i}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn zero_measure_columns_are_identical() {
        let sol = solve(&MarketModel::merton_constant(), &merton_ou(), &SolverGrid::new(1000, 100, 2.0)).unwrap();
        let l = *sol.surface.lattice();
        for i in 0..=l.t_steps {
            let row = sol.surface.row(i);
            for &v in row {
                assert!((v - row[0]).abs() <= 1e-12 * row[0]);
            }
        }
    }

    #[test]
    fn refuses_cfl_and_kappa_violations() {
        let ou = merton_ou();
        let m = MarketModel::merton_constant();
        assert!(matches!(solve(&m, &ou, &SolverGrid::new(10, 400, 2.0)), Err(Error::CflViolated { .. })));
        let grid = SolverGrid {
            kappa: Some(1e-3),
            ..SolverGrid::new(2000, 100, 2.0)
        };
        assert!(matches!(solve(&m, &ou, &grid), Err(Error::KappaTooSmall { .. })));
    }

    #[test]
    fn scaled_step_equals_plain_step() {
        let ou = OuParams::new(1.0 / 6.0, 0.2, SubordinatorSpec::compound_poisson_exp(0.5, 15.0).unwrap()).unwrap();
        let m = MarketModel::bns_example();
        let grid = SolverGrid::new(400, 80, 2.0);
        let d = derive_constants(&m, &ou, 1.0).unwrap();
        let a = Stepper::new(&m, &ou, &grid, d.b_double + 1.0, d.b_prime).unwrap();
        let b = Stepper::new(&m, &ou, &grid, d.b_double + 3.0, d.b_prime).unwrap();
        let f: Vec<f64> = (1..=80).map(|j| 1.0 + 0.3 * (j as f64 * 0.025).powi(2)).collect();
        let (mut fa, mut fb) = (vec![0.0; 80], vec![0.0; 80]);
        a.step(&f, &mut fa);
        b.step(&f, &mut fb);
        for (x, y) in fa.iter().zip(&fb) {
            assert!((x - y).abs() < 1e-12 * x);
        }
    }

    #[test]
    fn consumption_is_unit_at_maturity() {
        let sol = solve(&MarketModel::merton_constant(), &merton_ou(), &SolverGrid::new(500, 50, 2.0)).unwrap();
        let c = consumption_surface(&sol.surface, 0.5);
        let l = *c.lattice();
        assert!(c.row(l.t_steps).iter().all(|&v| v == 1.0));
        assert!(c.values().iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn flat_solution_has_zero_derivative() {
        let m = MarketModel::affine(
            Affine::constant(0.0),
            Affine::constant(0.1),
            Affine::constant(0.25),
            0.5,
            1.0,
            None,
        )
        .unwrap();
        let sol = solve(&m, &merton_ou(), &SolverGrid::new(500, 50, 2.0)).unwrap();
        let r = derivative_bound_check(&sol.surface, &sol.constants);
        assert_eq!(r.within, r.checked);
        assert!(r.worst_ratio < 1e-9);
    }
}
