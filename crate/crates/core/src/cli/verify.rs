use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::factor::OuParams;
use crate::market::{derive_constants, MarketModel, DEFAULT_ALPHA_MARGIN};
use crate::oracle::{self, JensenConfig, ProbeEstimate};
use crate::pide::{derivative_bound_check, envelope_breaches};
use crate::surface::ValueSurface;

use super::RunConfig;

/// Relative tolerance for comparisons without sampling noise, added to the
/// residual allowance when the factor is deterministic.
pub const DETERMINISTIC_TOLERANCE: f64 = 1e-4;
/// Absolute tolerance for the Jensen gap of a deterministic factor.
pub const NULL_GAP_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub probes: Vec<ProbeEstimate>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,statistic,threshold,passed,detail\n");
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{},{:.10e},{:.10e},{},\"{}\"",
                c.name,
                c.statistic,
                c.threshold,
                c.passed,
                c.detail.replace('"', "'")
            );
        }
        out
    }

    fn push(&mut self, name: &str, statistic: f64, threshold: f64, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.into(),
            statistic,
            threshold,
            passed,
            detail,
        });
    }

    fn push_error(&mut self, name: &str, err: &Error) {
        self.push(name, f64::NAN, f64::NAN, false, err.to_string());
    }
}

/// Runs the bound sweep, the fixed-point residual, the contraction probe,
/// the derivative bound, the Jensen gap and, for constant coefficients
/// without jumps, the closed-form comparison on `surface`.
pub fn verify_surface(surface: &ValueSurface, model: &MarketModel, ou: &OuParams, cfg: &RunConfig) -> Result<VerifyReport> {
    let constants = derive_constants(model, ou, DEFAULT_ALPHA_MARGIN)?;
    let mut report = VerifyReport::default();

    let breaches = envelope_breaches(surface, &constants);
    let detail = match breaches.first() {
        Some(b) => format!("{} of {} nodes outside [1, envelope]; first {b}", breaches.len(), surface.values().len()),
        None => format!("all {} nodes inside [1, envelope]", surface.values().len()),
    };
    report.push("bounds", breaches.len() as f64, 0.0, breaches.is_empty(), detail);

    let mc = cfg.mc();
    match oracle::apply_operator(surface, model, ou, &mc) {
        Ok(probes) => {
            let mut worst: f64 = 0.0;
            let mut failures = 0;
            for p in &probes {
                let f = surface.interpolate(p.t, p.y);
                let residual = (p.estimate - f).abs();
                let tol = if ou.subordinator.is_null() {
                    3.0 * p.std_error + DETERMINISTIC_TOLERANCE * f
                } else {
                    3.0 * p.std_error
                };
                worst = worst.max(residual / tol);
                if residual > tol {
                    failures += 1;
                }
            }
            let detail = format!(
                "{failures} of {} probes outside tolerance; worst residual/tolerance {worst:.3}",
                probes.len()
            );
            report.push("fixed_point_residual", worst, 1.0, failures == 0, detail);
            report.probes = probes;
        }
        Err(e) => report.push_error("fixed_point_residual", &e),
    }

    let mut cmc = mc.clone();
    cmc.n_paths = cfg.contraction_paths;
    match oracle::contraction_suite(model, ou, &cmc, cfg.contraction_pairs) {
        Ok(samples) => {
            let excess = samples
                .iter()
                .map(|s| s.output_distance - s.modulus * s.input_distance - 3.0 * s.noise)
                .fold(f64::NEG_INFINITY, f64::max);
            let ratio = samples
                .iter()
                .map(|s| s.output_distance / s.input_distance)
                .fold(0.0, f64::max);
            let held = samples.iter().filter(|s| s.holds()).count();
            let modulus = samples.first().map_or(f64::NAN, |s| s.modulus);
            let detail = format!(
                "{held} of {} pairs within modulus {modulus:.4} + 3 sigma; largest ratio {ratio:.4}",
                samples.len()
            );
            report.push("contraction", excess, 0.0, held == samples.len(), detail);
        }
        Err(e) => report.push_error("contraction", &e),
    }

    let d = derivative_bound_check(surface, &constants);
    report.push(
        "derivative_bound",
        d.worst_ratio,
        1.0,
        d.within == d.checked,
        format!("{} of {} interior nodes within the bound; worst ratio {:.4}", d.within, d.checked, d.worst_ratio),
    );

    let jensen = JensenConfig::new(0.0, model.horizon(), cfg.jensen_paths, cfg.seed)
        .and_then(|jc| oracle::jensen_gap(model, ou, (0.0, ou.initial_level), &jc));
    match jensen {
        Ok(j) => {
            let stochastic = !ou.subordinator.is_null();
            let (passed, threshold, rule) = if stochastic {
                (j.strictly_positive(), 3.0 * j.gap.std_error, "gap > 3 sigma")
            } else {
                (j.nonnegative() && j.gap.mean.abs() <= NULL_GAP_TOLERANCE, NULL_GAP_TOLERANCE, "|gap| <= 1e-8")
            };
            let detail = format!(
                "gap {:.4e} +- {:.2e} at (0, {}); {rule}",
                j.gap.mean, j.gap.std_error, ou.initial_level
            );
            report.push("jensen_gap", j.gap.mean, threshold, passed, detail);
        }
        Err(e) => report.push_error("jensen_gap", &e),
    }

    if model.is_constant() && ou.subordinator.is_null() {
        let q = model.q(ou.initial_level);
        let mut worst: f64 = 0.0;
        for ((_, _, t, _), &v) in surface.lattice().nodes().zip(surface.values()) {
            let exact = oracle::merton_closed_form(q, model.gamma(), model.horizon(), t);
            worst = worst.max(((v - exact) / exact).abs());
        }
        report.push(
            "closed_form",
            worst,
            DETERMINISTIC_TOLERANCE,
            worst <= DETERMINISTIC_TOLERANCE,
            format!("largest relative deviation from the constant-Q closed form {worst:.3e}"),
        );
    }
    Ok(report)
}
