//! Monte Carlo evaluation of the Feynman–Kac operator
//!
//! ```text
//! (𝓛f)(t, y) = E[ e^{γ ∫_t^T Q(Y) du}
//!               + (1-γ) ∫_t^T e^{γ ∫_t^s Q(Y) du} f(s, Y(s))^{-γ/(1-γ)} ds ]
//! ```
//!
//! over exactly simulated factor paths, together with the fixed-point
//! iteration it drives, the weighted-sup metric in which it contracts, the
//! constant-coefficient closed form and the pathwise-certainty comparison.
//!
//! Time integrals are taken piece by piece between jumps: on each piece the
//! factor is a known exponential, so `∫Q` and the outer integral use
//! composite Simpson on a uniform sub-grid. A path without jumps is a
//! deterministic function of the probe, so its sample is computed once and
//! reused.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{ensure, Error, Result};
use crate::factor::{FactorPath, OuParams};
use crate::levy::{stream_rng, Stream};
use crate::market::{derive_constants, DerivedConstants, MarketModel, DEFAULT_ALPHA_MARGIN};
use crate::quad;
use crate::stats::Estimate;
use crate::surface::{Lattice, ValueFunction, ValueSurface};

/// Default outer quadrature step is `(T - t) / SUBSTEP_DIVISIONS`.
pub const SUBSTEP_DIVISIONS: f64 = 128.0;

#[derive(Clone, Debug, PartialEq)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Quadrature step; `None` means `(T - t)/128` for a probe at `t`.
    pub substep: Option<f64>,
    pub probe_points: Vec<(f64, f64)>,
}

impl McConfig {
    pub fn new(n_paths: usize, seed: u64, horizon: f64) -> Self {
        Self {
            n_paths,
            seed,
            substep: None,
            probe_points: default_probes(horizon),
        }
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        ensure(self.n_paths >= 100, "mc.n_paths", || {
            format!("must be >= 100, got {}", self.n_paths)
        })?;
        if let Some(h) = self.substep {
            ensure(h.is_finite() && h > 0.0, "mc.substep", || format!("must be > 0, got {h}"))?;
        }
        for &(t, y) in &self.probe_points {
            ensure((0.0..=horizon).contains(&t) && y > 0.0, "mc.probe_points", || {
                format!("probe ({t}, {y}) lies outside [0, {horizon}] x (0, inf)")
            })?;
        }
        Ok(())
    }

    fn substep_for(&self, t: f64, horizon: f64) -> f64 {
        self.substep.unwrap_or_else(|| {
            let len = horizon - t;
            if len > 0.0 {
                len / SUBSTEP_DIVISIONS
            } else {
                1.0
            }
        })
    }
}

/// Twenty probes: `t ∈ {0, T/4, T/2, 3T/4}` by `y ∈ {0.1, 0.2, 0.3, 0.5, 0.8}`.
pub fn default_probes(horizon: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(20);
    for k in 0..4 {
        for y in [0.1, 0.2, 0.3, 0.5, 0.8] {
            out.push((horizon * k as f64 / 4.0, y));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeEstimate {
    pub t: f64,
    pub y: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub envelope: f64,
}

impl ProbeEstimate {
    pub fn lower_bound(&self) -> f64 {
        self.estimate - 3.0 * self.std_error
    }

    pub fn upper_bound(&self) -> f64 {
        self.estimate + 3.0 * self.std_error
    }
}

pub fn probes_to_csv(probes: &[ProbeEstimate]) -> String {
    let mut out = String::from("t,y,estimate,std_error,lower_bound,upper_bound,envelope\n");
    for p in probes {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            p.t,
            p.y,
            p.estimate,
            p.std_error,
            p.lower_bound(),
            p.upper_bound(),
            p.envelope
        );
    }
    out
}

pub fn write_probes_csv(path: &Path, probes: &[ProbeEstimate]) -> Result<()> {
    crate::cli::write_atomic(path, probes_to_csv(probes).as_bytes())
}

/// Sample times, levels and running `∫Q` along one path, piece by piece.
#[derive(Default)]
struct PathNodes {
    /// `(first index, intervals, step)` per inter-jump piece.
    pieces: Vec<(usize, usize, f64)>,
    s: Vec<f64>,
    y: Vec<f64>,
    q_int: Vec<f64>,
    scratch: Vec<f64>,
    cum: Vec<f64>,
}

impl PathNodes {
    fn fill(&mut self, path: &FactorPath, model: &MarketModel, substep: f64) {
        self.pieces.clear();
        self.s.clear();
        self.y.clear();
        self.q_int.clear();
        let lam = path.reversion();
        let mut acc = 0.0;
        let (scratch, cum) = (&mut self.scratch, &mut self.cum);
        let (pieces, s, y, q_int) = (&mut self.pieces, &mut self.s, &mut self.y, &mut self.q_int);
        path.for_each_piece(path.start(), path.end(), |p| {
            if p.is_empty() {
                return;
            }
            let n = quad::even_intervals(p.len(), substep);
            let h = p.len() / n as f64;
            let first = s.len();
            scratch.clear();
            for k in 0..=n {
                let level = p.level * (-lam * h * k as f64).exp();
                s.push(p.start + h * k as f64);
                y.push(level);
                scratch.push(model.q(level));
            }
            quad::cumulative(scratch, h, cum);
            q_int.extend(cum.iter().map(|c| acc + c));
            acc += cum[n];
            pieces.push((first, n, h));
        });
    }

    /// `∫_t^T Q(Y) du`.
    fn q_total(&self) -> f64 {
        self.q_int.last().copied().unwrap_or(0.0)
    }

    /// One sample of the integrand of `𝓛f`.
    fn operator_sample(&mut self, f: &dyn ValueFunction, gamma: f64) -> Result<f64> {
        let p = gamma / (1.0 - gamma);
        let mut outer = 0.0;
        for &(first, n, h) in &self.pieces {
            self.scratch.clear();
            for k in first..=first + n {
                let (s, y) = (self.s[k], self.y[k]);
                let v = f.value(s, y);
                if !(v >= 1.0 - 1e-12) {
                    return Err(Error::BelowUnitFloor { t: s, y, value: v });
                }
                self.scratch.push((gamma * self.q_int[k]).exp() * v.powf(-p));
            }
            outer += quad::simpson(&self.scratch, h);
        }
        Ok((gamma * self.q_total()).exp() + (1.0 - gamma) * outer)
    }
}

fn check_floor(f: &dyn ValueFunction) -> Result<()> {
    if let Some(min) = f.stored_minimum() {
        if !(min >= 1.0 - 1e-12) {
            return Err(Error::BelowUnitFloor {
                t: f64::NAN,
                y: f64::NAN,
                value: min,
            });
        }
    }
    Ok(())
}

/// Per-path samples of `𝓛f_k` at `(t, y)` for every `f_k` in `fs`, all on
/// the same paths. Returns `samples[k][path]`.
pub fn sample_operator(
    fs: &[&dyn ValueFunction],
    model: &MarketModel,
    ou: &OuParams,
    (t, y): (f64, f64),
    n_paths: usize,
    substep: f64,
    rng: &mut Stream,
) -> Result<Vec<Vec<f64>>> {
    let horizon = model.horizon();
    let gamma = model.gamma();
    let mut out = vec![Vec::with_capacity(n_paths); fs.len()];
    let mut nodes = PathNodes::default();
    let mut calm: Option<Vec<f64>> = None;
    for _ in 0..n_paths {
        let path = FactorPath::evolve_from(ou, t, y, horizon, rng)?;
        if path.jumps().is_empty() {
            if calm.is_none() {
                nodes.fill(&path, model, substep);
                let v = fs
                    .iter()
                    .map(|f| nodes.operator_sample(*f, gamma))
                    .collect::<Result<Vec<_>>>()?;
                calm = Some(v);
            }
            for (o, v) in out.iter_mut().zip(calm.as_ref().unwrap()) {
                o.push(*v);
            }
            continue;
        }
        nodes.fill(&path, model, substep);
        for (o, f) in out.iter_mut().zip(fs) {
            o.push(nodes.operator_sample(*f, gamma)?);
        }
    }
    Ok(out)
}

/// Estimates `(𝓛f)(t, y)` at every probe of `cfg`. Probe `k` draws its
/// paths from stream `k` of `cfg.seed`.
pub fn apply_operator(
    f: &dyn ValueFunction,
    model: &MarketModel,
    ou: &OuParams,
    cfg: &McConfig,
) -> Result<Vec<ProbeEstimate>> {
    let horizon = model.horizon();
    cfg.validate(horizon)?;
    check_floor(f)?;
    let constants = derive_constants(model, ou, DEFAULT_ALPHA_MARGIN)?;
    cfg.probe_points
        .iter()
        .enumerate()
        .map(|(k, &(t, y))| {
            let mut rng = stream_rng(cfg.seed, k as u64);
            let samples = sample_operator(&[f], model, ou, (t, y), cfg.n_paths, cfg.substep_for(t, horizon), &mut rng)?;
            let e = Estimate::from_samples(&samples[0]);
            Ok(ProbeEstimate {
                t,
                y,
                estimate: e.mean,
                std_error: e.std_error,
                envelope: constants.envelope_upper(t, y),
            })
        })
        .collect()
}

/// Weights of the metric `d(φ, ξ) = sup e^{-α(T-t) - B'y} |φ - ξ|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricParams {
    pub alpha: f64,
    pub b_prime: f64,
    pub horizon: f64,
}

impl MetricParams {
    pub fn from_constants(c: &DerivedConstants) -> Self {
        Self {
            alpha: c.alpha,
            b_prime: c.b_prime,
            horizon: c.horizon,
        }
    }

    pub fn weight(&self, t: f64, y: f64) -> f64 {
        (-self.alpha * (self.horizon - t) - self.b_prime * y).exp()
    }
}

/// Weighted-sup distance over the shared lattice nodes.
pub fn metric_distance(f: &ValueSurface, g: &ValueSurface, params: &MetricParams) -> Result<f64> {
    f.check_same_lattice(g)?;
    Ok(f.lattice()
        .nodes()
        .zip(f.values().iter().zip(g.values()))
        .map(|((_, _, t, y), (a, b))| params.weight(t, y) * (a - b).abs())
        .fold(0.0, f64::max))
}

/// Constant-`Q` solution of `f' + γ q f + (1-γ) f^{-γ/(1-γ)} = 0`,
/// `f(T) = 1`.
pub fn merton_closed_form(q: f64, gamma: f64, horizon: f64, t: f64) -> f64 {
    let tau = horizon - t;
    let k = gamma * q / (1.0 - gamma);
    let u = if k.abs() < 1e-14 {
        1.0 + tau
    } else {
        (1.0 + 1.0 / k) * (k * tau).exp() - 1.0 / k
    };
    u.powf(1.0 - gamma)
}

/// Outcome of [`fixed_point_iterate`].
#[derive(Clone, Debug)]
pub struct FixedPointRun {
    /// `f_0` sampled on the lattice, then `f_1 = 𝓛f_0`, `f_2`, …
    pub iterates: Vec<ValueSurface>,
    /// Node-wise standard errors of each iterate (zero for `f_0`).
    pub std_errors: Vec<Vec<f64>>,
    /// `d(f_{n+1}, f_n)`.
    pub distances: Vec<f64>,
    /// Weighted standard error of `f_{n+1} - f_n`, maximised over nodes.
    pub noise: Vec<f64>,
    pub modulus: f64,
}

impl FixedPointRun {
    /// Indices `n ≥ 1` where `d_n > ζ d_{n-1} + 3 noise_n + floor`.
    pub fn decay_violations(&self, floor: f64) -> Vec<usize> {
        (1..self.distances.len())
            .filter(|&n| self.distances[n] > self.modulus * self.distances[n - 1] + 3.0 * self.noise[n] + floor)
            .collect()
    }
}

/// Iterates `f_{n+1} = 𝓛f_n` on the nodes of `lattice`, reconstructing each
/// iterate by interpolation. Node `k` uses stream `k` of `cfg.seed` in every
/// iteration, so successive iterates share their paths.
pub fn fixed_point_iterate(
    f0: &dyn ValueFunction,
    model: &MarketModel,
    ou: &OuParams,
    cfg: &McConfig,
    lattice: Lattice,
    n_iter: usize,
) -> Result<FixedPointRun> {
    let horizon = model.horizon();
    cfg.validate(horizon)?;
    check_floor(f0)?;
    let constants = derive_constants(model, ou, DEFAULT_ALPHA_MARGIN)?;
    let metric = MetricParams::from_constants(&constants);
    let rate = constants.b_prime;
    let nodes: Vec<(f64, f64)> = lattice.nodes().map(|(_, _, t, y)| (t, y)).collect();
    let mut iterates = vec![ValueSurface::from_fn(lattice, rate, |t: f64, y: f64| f0.value(t, y))];
    let mut std_errors = vec![vec![0.0; nodes.len()]];
    let mut distances = Vec::new();
    let mut noise = Vec::new();
    let mut previous: Option<Vec<Vec<f64>>> = None;
    for _ in 0..n_iter {
        let current = iterates.last().unwrap();
        let mut samples = Vec::with_capacity(nodes.len());
        let mut values = Vec::with_capacity(nodes.len());
        let mut errors = Vec::with_capacity(nodes.len());
        let mut worst_noise: f64 = 0.0;
        for (k, &(t, y)) in nodes.iter().enumerate() {
            let mut rng = stream_rng(cfg.seed, k as u64);
            let s = sample_operator(&[current], model, ou, (t, y), cfg.n_paths, cfg.substep_for(t, horizon), &mut rng)?
                .pop()
                .unwrap();
            let e = Estimate::from_samples(&s);
            let diff_se = match &previous {
                Some(prev) => {
                    let d: Vec<f64> = s.iter().zip(&prev[k]).map(|(a, b)| a - b).collect();
                    Estimate::from_samples(&d).std_error
                }
                None => e.std_error,
            };
            worst_noise = worst_noise.max(metric.weight(t, y) * diff_se);
            values.push(e.mean);
            errors.push(e.std_error);
            samples.push(s);
        }
        let next = ValueSurface::new(lattice, values, rate)?;
        distances.push(metric_distance(&next, current, &metric)?);
        noise.push(worst_noise);
        iterates.push(next);
        std_errors.push(errors);
        previous = Some(samples);
    }
    Ok(FixedPointRun {
        iterates,
        std_errors,
        distances,
        noise,
        modulus: constants.contraction_modulus(),
    })
}

/// One contraction measurement for a pair of inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContractionSample {
    pub input_distance: f64,
    pub output_distance: f64,
    /// Weighted paired standard error of `𝓛φ - 𝓛ξ`, maximised over probes.
    pub noise: f64,
    pub modulus: f64,
}

impl ContractionSample {
    pub fn holds(&self) -> bool {
        self.output_distance <= self.modulus * self.input_distance + 3.0 * self.noise
    }
}

/// Measures `d(𝓛φ, 𝓛ξ)` over the probes of `cfg` on common paths and
/// compares it with `d(φ, ξ)` over the input lattice.
pub fn contraction_probe(
    phi: &ValueSurface,
    xi: &ValueSurface,
    model: &MarketModel,
    ou: &OuParams,
    cfg: &McConfig,
) -> Result<ContractionSample> {
    let horizon = model.horizon();
    cfg.validate(horizon)?;
    check_floor(phi)?;
    check_floor(xi)?;
    let constants = derive_constants(model, ou, DEFAULT_ALPHA_MARGIN)?;
    let metric = MetricParams::from_constants(&constants);
    let input_distance = metric_distance(phi, xi, &metric)?;
    let mut output_distance: f64 = 0.0;
    let mut noise: f64 = 0.0;
    for (k, &(t, y)) in cfg.probe_points.iter().enumerate() {
        let mut rng = stream_rng(cfg.seed, k as u64);
        let s = sample_operator(&[phi, xi], model, ou, (t, y), cfg.n_paths, cfg.substep_for(t, horizon), &mut rng)?;
        let d: Vec<f64> = s[0].iter().zip(&s[1]).map(|(a, b)| a - b).collect();
        let e = Estimate::from_samples(&d);
        let w = metric.weight(t, y);
        output_distance = output_distance.max(w * e.mean.abs());
        noise = noise.max(w * e.std_error);
    }
    Ok(ContractionSample {
        input_distance,
        output_distance,
        noise,
        modulus: constants.contraction_modulus(),
    })
}

/// A smooth random surface with `1 ≤ f ≤ 1 + 0.9 (envelope - 1)` at every
/// node, extrapolated with rate `B'`.
pub fn random_band_surface<R: Rng + ?Sized>(lattice: Lattice, constants: &DerivedConstants, rng: &mut R) -> ValueSurface {
    let amp: f64 = rng.random_range(0.1..0.9);
    let (a, b, c): (f64, f64, f64) = (
        rng.random_range(0.0..6.0),
        rng.random_range(0.0..6.0),
        rng.random_range(0.0..std::f64::consts::TAU),
    );
    ValueSurface::from_fn(lattice, constants.b_prime, |t: f64, y: f64| {
        let u = 0.5 * amp * (1.0 + (a * t + b * y + c).sin());
        1.0 + u * (constants.envelope_upper(t, y) - 1.0)
    })
}

/// Lattice used for random band surfaces: `[0, T] × [0.01, 2]`.
pub fn band_lattice(horizon: f64) -> Result<Lattice> {
    Lattice::spanning(0.0, horizon, 40, 0.01, 2.0, 80)
}

/// [`contraction_probe`] on `n_pairs` independent random band pairs; pair
/// `k` is drawn from stream `k` of `seed + 2`.
pub fn contraction_suite(
    model: &MarketModel,
    ou: &OuParams,
    cfg: &McConfig,
    n_pairs: usize,
) -> Result<Vec<ContractionSample>> {
    let constants = derive_constants(model, ou, DEFAULT_ALPHA_MARGIN)?;
    let lattice = band_lattice(model.horizon())?;
    (0..n_pairs)
        .map(|k| {
            let mut rng = stream_rng(cfg.seed.wrapping_add(2), k as u64);
            let phi = random_band_surface(lattice, &constants, &mut rng);
            let xi = random_band_surface(lattice, &constants, &mut rng);
            contraction_probe(&phi, &xi, model, ou, cfg)
        })
        .collect()
}

/// Pathwise solution `f̄(s, ω)` of `f̄' + γ Q(Y(s, ω)) f̄ + (1-γ) f̄^{-γ/(1-γ)} = 0`,
/// `f̄(T) = 1`, at the nodes of `nodes`.
///
/// With `a = γ/(1-γ)` and `u = f̄^{1/(1-γ)}` the equation becomes
/// `u' = -a Q u - 1`, so with `I(s) = ∫_t^s Q` and `R(s) = ∫_t^s e^{a I}`,
/// `u(s) = e^{a (I(T) - I(s))} + e^{-a I(s)} (R(T) - R(s))`.
fn pathwise_values(nodes: &mut PathNodes, gamma: f64, out: &mut Vec<f64>) {
    let a = gamma / (1.0 - gamma);
    let mut r = Vec::with_capacity(nodes.s.len());
    let mut acc = 0.0;
    for &(first, n, h) in &nodes.pieces {
        nodes.scratch.clear();
        nodes
            .scratch
            .extend(nodes.q_int[first..=first + n].iter().map(|i| (a * i).exp()));
        quad::cumulative(&nodes.scratch, h, &mut nodes.cum);
        r.extend(nodes.cum.iter().map(|c| acc + c));
        acc += nodes.cum[n];
    }
    let (i_total, r_total) = (nodes.q_total(), acc);
    out.clear();
    out.extend(nodes.q_int.iter().zip(&r).map(|(&i, &r)| {
        let u = (a * (i_total - i)).exp() + (-a * i).exp() * (r_total - r);
        u.powf(1.0 - gamma)
    }));
}

/// `f̄(t, ω)` at the start of `path`.
pub fn path_certainty_value(path: &FactorPath, model: &MarketModel, substep: f64) -> f64 {
    let mut nodes = PathNodes::default();
    nodes.fill(path, model, substep);
    if nodes.pieces.is_empty() {
        return 1.0;
    }
    let mut out = Vec::new();
    pathwise_values(&mut nodes, model.gamma(), &mut out);
    out[0]
}

/// `f̄(t, ω)` for every path, with the default substep per path.
pub fn path_certainty_values(paths: &[FactorPath], model: &MarketModel) -> Vec<f64> {
    paths
        .iter()
        .map(|p| {
            let len = p.end() - p.start();
            let h = if len > 0.0 { len / SUBSTEP_DIVISIONS } else { 1.0 };
            path_certainty_value(p, model, h)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct JensenConfig {
    /// Lattice on which `m(s, y) = E^{s,y}[f̄(s)]` is estimated; it must start
    /// at the probe time and end at `T`.
    pub surface_lattice: Lattice,
    pub surface_paths: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub substep: Option<f64>,
}

impl JensenConfig {
    pub fn new(t: f64, horizon: f64, n_paths: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            surface_lattice: Lattice::spanning(t, horizon, 20, 0.02, 1.0, 25)?,
            surface_paths: 4000,
            n_paths,
            seed,
            substep: None,
        })
    }
}

/// Comparison of `E[f̄]` with `𝓛` applied to it at one probe.
#[derive(Clone, Debug)]
pub struct JensenReport {
    pub t: f64,
    pub y: f64,
    /// `E[f̄(t)]`.
    pub mean_certainty: Estimate,
    /// `𝓛 m̂ (t, y)` for the estimated surface `m̂ ≈ E[f̄]`.
    pub operator_of_mean: Estimate,
    /// `E[f̄] - 𝓛E[f̄]` through the pathwise Bregman form.
    pub gap: Estimate,
    /// The plain paired difference `f̄(t) - 𝓛-integrand`.
    pub naive_gap: Estimate,
    pub surface: ValueSurface,
}

impl JensenReport {
    pub fn nonnegative(&self) -> bool {
        self.gap.mean >= -3.0 * self.gap.std_error
    }

    pub fn strictly_positive(&self) -> bool {
        self.gap.mean > 3.0 * self.gap.std_error
    }
}

/// Estimates `E[f̄(t)] - (𝓛 E[f̄])(t, y)`.
///
/// `E[f̄]` is first estimated as a surface `m̂` on the configured lattice.
/// Along each probe path, `f̄(s) - 𝓛`-integrand equals
/// `(1-γ) ∫ e^{γ∫Q} (f̄(s)^{-p} - m̂^{-p}) ds`; adding
/// `p m̂^{-p-1} (f̄(s) - m̂)`, which has conditional mean zero when `m̂` is
/// exact, turns the integrand into a Bregman divergence of the convex map
/// `x ↦ x^{-p}`. Each sample is then nonnegative and errors in `m̂` enter
/// only at second order.
pub fn jensen_gap(model: &MarketModel, ou: &OuParams, (t, y): (f64, f64), cfg: &JensenConfig) -> Result<JensenReport> {
    let horizon = model.horizon();
    let gamma = model.gamma();
    let p = gamma / (1.0 - gamma);
    let l = cfg.surface_lattice;
    ensure((l.t_start - t).abs() < 1e-12 && (l.t_end - horizon).abs() < 1e-12, "jensen.lattice", || {
        format!("lattice must span [{t}, {horizon}]")
    })?;
    ensure(cfg.n_paths >= 100 && cfg.surface_paths >= 1, "jensen.n_paths", || "too few paths".into())?;
    let constants = derive_constants(model, ou, DEFAULT_ALPHA_MARGIN)?;
    let substep_for = |s: f64| {
        cfg.substep.unwrap_or_else(|| {
            let len = horizon - s;
            if len > 0.0 {
                len / SUBSTEP_DIVISIONS
            } else {
                1.0
            }
        })
    };

    let mut nodes = PathNodes::default();
    let mut values = Vec::with_capacity(l.len());
    for (k, (_, _, s, yk)) in l.nodes().enumerate() {
        if s >= horizon {
            values.push(1.0);
            continue;
        }
        let mut rng = stream_rng(cfg.seed.wrapping_add(1), k as u64);
        let h = substep_for(s);
        let mut calm = None;
        let mut acc = Vec::with_capacity(cfg.surface_paths);
        for _ in 0..cfg.surface_paths {
            let path = FactorPath::evolve_from(ou, s, yk, horizon, &mut rng)?;
            let v = if path.jumps().is_empty() {
                *calm.get_or_insert_with(|| path_certainty_value(&path, model, h))
            } else {
                path_certainty_value(&path, model, h)
            };
            acc.push(v);
        }
        values.push(Estimate::from_samples(&acc).mean);
    }
    let surface = ValueSurface::new(l, values, constants.b_prime)?;

    let mut rng = stream_rng(cfg.seed, 0);
    let h = substep_for(t);
    let mut certainty = Vec::with_capacity(cfg.n_paths);
    let mut operator = Vec::with_capacity(cfg.n_paths);
    let mut gap = Vec::with_capacity(cfg.n_paths);
    let mut calm: Option<(f64, f64, f64)> = None;
    let mut fbar = Vec::new();
    for _ in 0..cfg.n_paths {
        let path = FactorPath::evolve_from(ou, t, y, horizon, &mut rng)?;
        let quiet = path.jumps().is_empty();
        if let (true, Some(c)) = (quiet, calm) {
            certainty.push(c.0);
            operator.push(c.1);
            gap.push(c.2);
            continue;
        }
        nodes.fill(&path, model, h);
        let sample = if nodes.pieces.is_empty() {
            (1.0, 1.0, 0.0)
        } else {
            pathwise_values(&mut nodes, gamma, &mut fbar);
            let mut outer = 0.0;
            let mut bregman = 0.0;
            let mut op_terms = Vec::new();
            let mut br_terms = Vec::new();
            for &(first, n, step) in &nodes.pieces {
                op_terms.clear();
                br_terms.clear();
                for k in first..=first + n {
                    let m = surface.interpolate(nodes.s[k], nodes.y[k]);
                    let weight = (gamma * nodes.q_int[k]).exp();
                    let mp = m.powf(-p);
                    op_terms.push(weight * mp);
                    let fb = fbar[k];
                    br_terms.push(weight * (fb.powf(-p) - mp + p * mp / m * (fb - m)));
                }
                outer += quad::simpson(&op_terms, step);
                bregman += quad::simpson(&br_terms, step);
            }
            let op = (gamma * nodes.q_total()).exp() + (1.0 - gamma) * outer;
            (fbar[0], op, (1.0 - gamma) * bregman)
        };
        if quiet {
            calm = Some(sample);
        }
        certainty.push(sample.0);
        operator.push(sample.1);
        gap.push(sample.2);
    }
    let naive: Vec<f64> = certainty.iter().zip(&operator).map(|(a, b)| a - b).collect();
    Ok(JensenReport {
        t,
        y,
        mean_certainty: Estimate::from_samples(&certainty),
        operator_of_mean: Estimate::from_samples(&operator),
        gap: Estimate::from_samples(&gap),
        naive_gap: Estimate::from_samples(&naive),
        surface,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::JumpEvent;
    use crate::levy::SubordinatorSpec;

    fn merton_ou() -> OuParams {
        OuParams::new(1.0 / 6.0, 0.2, SubordinatorSpec::Null).unwrap()
    }

    fn bns_ou() -> OuParams {
        OuParams::new(1.0 / 6.0, 0.2, SubordinatorSpec::compound_poisson_exp(0.5, 15.0).unwrap()).unwrap()
    }

    /// Classical RK4 on `f' = -γ q f - (1-γ) f^{-γ/(1-γ)}` backwards from 1.
    fn rk4(q: f64, gamma: f64, tau: f64, steps: usize) -> f64 {
        let p = gamma / (1.0 - gamma);
        let rhs = |f: f64| gamma * q * f + (1.0 - gamma) * f.powf(-p);
        let h = tau / steps as f64;
        let mut f = 1.0;
        for _ in 0..steps {
            let k1 = rhs(f);
            let k2 = rhs(f + h * k1 / 2.0);
            let k3 = rhs(f + h * k2 / 2.0);
            let k4 = rhs(f + h * k3);
            f += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        }
        f
    }

    #[test]
    fn closed_form_matches_runge_kutta() {
        let v = merton_closed_form(0.04, 0.5, 1.0, 0.0);
        assert!((v - (26.0 * 0.04f64.exp() - 25.0).sqrt()).abs() < 1e-14);
        assert!((v - rk4(0.04, 0.5, 1.0, 2000)).abs() < 1e-10);
        assert_eq!(merton_closed_form(0.04, 0.5, 1.0, 1.0), 1.0);
        for gamma in [0.2, 0.5, 0.9] {
            let v = merton_closed_form(0.0, gamma, 1.0, 0.3);
            assert!((v - 1.7f64.powf(1.0 - gamma)).abs() < 1e-14);
            assert!((v - rk4(0.0, gamma, 0.7, 2000)).abs() < 1e-10);
        }
    }

    #[test]
    fn closed_form_ode_residual() {
        let (q, g) = (0.04, 0.5);
        let f = |t: f64| merton_closed_form(q, g, 1.0, t);
        let h = 1e-3;
        for k in 1..10 {
            let t = k as f64 / 10.0;
            let df = (f(t - 2.0 * h) - 8.0 * f(t - h) + 8.0 * f(t + h) - f(t + 2.0 * h)) / (12.0 * h);
            let res = df + g * q * f(t) + (1.0 - g) * f(t).powf(-g / (1.0 - g));
            assert!(res.abs() < 1e-10, "{res:e}");
        }
    }

    #[test]
    fn operator_on_unit_function_with_constant_q() {
        let model = MarketModel::merton_constant();
        let cfg = McConfig {
            probe_points: vec![(0.0, 0.2), (0.4, 0.7), (1.0, 0.3)],
            ..McConfig::new(200, 3, 1.0)
        };
        let one = |_t: f64, _y: f64| 1.0;
        let out = apply_operator(&one, &model, &merton_ou(), &cfg).unwrap();
        let (g, q) = (0.5, 0.04);
        for p in &out {
            let tau = 1.0 - p.t;
            let exact = (g * q * tau).exp() + (1.0 - g) * ((g * q * tau).exp() - 1.0) / (g * q);
            assert!((p.estimate - exact).abs() <= 3.0 * p.std_error + 1e-12, "{p:?}");
        }
        assert_eq!(out[2].estimate, 1.0);
    }

    #[test]
    fn operator_on_envelope_is_at_least_one() {
        let model = MarketModel::bns_example();
        let ou = bns_ou();
        let d = derive_constants(&model, &ou, 1.0).unwrap();
        let env = move |t: f64, y: f64| d.envelope_upper(t, y);
        let out = apply_operator(&env, &model, &ou, &McConfig::new(500, 9, 1.0)).unwrap();
        for p in out {
            assert!(p.estimate >= 1.0);
            assert!(p.lower_bound() <= p.envelope);
        }
    }

    #[test]
    fn rejects_functions_below_one() {
        let model = MarketModel::bns_example();
        let half = |_t: f64, _y: f64| 0.5;
        let err = apply_operator(&half, &model, &bns_ou(), &McConfig::new(100, 1, 1.0)).unwrap_err();
        assert!(matches!(err, Error::BelowUnitFloor { .. }));
        let lattice = Lattice::spanning(0.0, 1.0, 4, 0.1, 1.0, 5).unwrap();
        let s = ValueSurface::constant(lattice, 0.9);
        assert!(apply_operator(&s, &model, &bns_ou(), &McConfig::new(100, 1, 1.0)).is_err());
    }

    #[test]
    fn reproducible_for_a_seed() {
        let model = MarketModel::bns_example();
        let one = |_t: f64, _y: f64| 1.0;
        let cfg = McConfig::new(300, 42, 1.0);
        let a = apply_operator(&one, &model, &bns_ou(), &cfg).unwrap();
        let b = apply_operator(&one, &model, &bns_ou(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn metric_axioms() {
        let lattice = Lattice::spanning(0.0, 1.0, 5, 0.1, 1.0, 8).unwrap();
        let params = MetricParams {
            alpha: 2.0,
            b_prime: 1.5,
            horizon: 1.0,
        };
        let f = ValueSurface::from_fn(lattice, 0.0, |t: f64, y: f64| 1.0 + t * y);
        let g = ValueSurface::from_fn(lattice, 0.0, |t: f64, y: f64| 1.0 + (t + y).sin().abs());
        let h = ValueSurface::from_fn(lattice, 0.0, |_t: f64, y: f64| 1.0 + y * y);
        assert_eq!(metric_distance(&f, &f, &params).unwrap(), 0.0);
        let (fg, gf) = (metric_distance(&f, &g, &params).unwrap(), metric_distance(&g, &f, &params).unwrap());
        assert_eq!(fg, gf);
        let fh = metric_distance(&f, &h, &params).unwrap();
        let gh = metric_distance(&g, &h, &params).unwrap();
        assert!(fh <= fg + gh + 1e-15);
        let other = ValueSurface::constant(Lattice::spanning(0.0, 1.0, 4, 0.1, 1.0, 8).unwrap(), 1.0);
        assert!(metric_distance(&f, &other, &params).is_err());
    }

    #[test]
    fn one_iteration_from_unit_stays_above_one() {
        let model = MarketModel::bns_example();
        let lattice = Lattice::spanning(0.0, 1.0, 4, 0.1, 0.9, 5).unwrap();
        let one = |_t: f64, _y: f64| 1.0;
        let run = fixed_point_iterate(&one, &model, &bns_ou(), &McConfig::new(200, 5, 1.0), lattice, 1).unwrap();
        assert!(run.iterates[1].values().iter().all(|&v| v >= 1.0));
    }

    #[test]
    fn certainty_on_constant_path_is_closed_form() {
        let model = MarketModel::merton_constant();
        let path = FactorPath::with_jumps(1.0 / 6.0, 0.0, 0.2, 1.0, vec![]).unwrap();
        let v = path_certainty_value(&path, &model, 1.0 / 128.0);
        assert!((v - merton_closed_form(0.04, 0.5, 1.0, 0.0)).abs() < 1e-8);
    }

    #[test]
    fn certainty_matches_direct_ode_on_a_jump_path() {
        let model = MarketModel::bns_example();
        let path = FactorPath::with_jumps(
            1.0 / 6.0,
            0.0,
            0.2,
            1.0,
            vec![JumpEvent { time: 0.3, size: 0.2 }, JumpEvent { time: 0.8, size: 0.1 }],
        )
        .unwrap();
        let v = path_certainty_value(&path, &model, 1.0 / 512.0);
        let (g, p) = (0.75, 3.0);
        let n = 200_000;
        let h = 1.0 / n as f64;
        let mut f = 1.0f64;
        for k in (0..n).rev() {
            let s = (k as f64 + 0.5) * h;
            let q = model.q(path.level(s));
            let rhs = |f: f64| g * q * f + (1.0 - g) * f.powf(-p);
            let mid = f + h / 2.0 * rhs(f);
            f += h * rhs(mid);
        }
        assert!((v - f).abs() < 1e-8, "{v} vs {f}");
    }

    #[test]
    fn band_surfaces_stay_in_the_band() {
        let model = MarketModel::bns_example();
        let ou = OuParams::new(1.0 / 6.0, 0.2, crate::levy::SubordinatorSpec::compound_poisson_exp(0.5, 15.0).unwrap()).unwrap();
        let c = derive_constants(&model, &ou, DEFAULT_ALPHA_MARGIN).unwrap();
        let lattice = band_lattice(1.0).unwrap();
        let mut rng = stream_rng(5, 0);
        for _ in 0..5 {
            let f = random_band_surface(lattice, &c, &mut rng);
            for ((_, _, t, y), &v) in lattice.nodes().zip(f.values()) {
                assert!(v >= 1.0 && v <= c.envelope_upper(t, y));
            }
        }
    }
}
