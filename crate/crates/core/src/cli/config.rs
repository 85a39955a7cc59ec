//! Flat `key = value` run configuration.
//!
//! ```text
//! # comment
//! market.preset = "bns-example"
//! market.sigma2 = 0 + 1*y
//! grid.time_steps = 8000
//! ```
//!
//! Keys are dotted, one per line; values may be quoted. A preset fills the
//! `market.*`, `ou.*` and `subordinator.*` keys, and explicit keys override
//! it. Numbers accept `p/q` fractions.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;

use crate::error::Error;
use crate::factor::OuParams;
use crate::levy::{check_condition_b, SubordinatorSpec};
use crate::market::{derive_constants, Affine, GrowthConstants, MarketModel, DEFAULT_ALPHA_MARGIN, DEFAULT_CONDITION_B_EPSILON};
use crate::oracle::McConfig;
use crate::pide::{SolverGrid, CFL_LIMIT};
use crate::strategy::DEFAULT_STEPS;

/// A problem with one config key.
#[derive(Clone, Debug, PartialEq)]
pub struct Issue {
    pub key: String,
    pub line: Option<usize>,
    pub reason: String,
}

impl Issue {
    fn new(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            line: None,
            reason: reason.into(),
        }
    }

    fn at(line: usize, key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            ..Self::new(key, reason)
        }
    }

    /// Attributes a library error to the config key that controls it.
    pub fn from_error(err: &Error) -> Self {
        let key = match err {
            Error::InvalidParameter { name, .. } => name.to_string(),
            Error::ConditionBViolated { .. } => "subordinator.jump_rate".into(),
            Error::CflViolated { .. } => "grid.time_steps".into(),
            Error::KappaTooSmall { .. } => "grid.kappa".into(),
            Error::GrowthViolation { .. } => "market.growth".into(),
            Error::NonPositiveLevel(_) => "ou.y0".into(),
            Error::Io(_) => "output.dir".into(),
            _ => "config".into(),
        };
        let reason = match err {
            Error::InvalidParameter { reason, .. } => reason.clone(),
            e => e.to_string(),
        };
        Self::new(key, reason)
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{} (line {line}): {}", self.key, self.reason),
            None => write!(f, "{}: {}", self.key, self.reason),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    BnsExample,
    MertonConstant,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::BnsExample => "bns-example",
            Preset::MertonConstant => "merton-constant",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bns-example" => Some(Preset::BnsExample),
            "merton-constant" => Some(Preset::MertonConstant),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Utility {
    Power,
    Log,
}

impl Utility {
    pub fn name(self) -> &'static str {
        match self {
            Utility::Power => "power",
            Utility::Log => "log",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarketSpec {
    pub gamma: f64,
    pub horizon: f64,
    pub r: Affine,
    pub mu: Affine,
    pub sigma2: Affine,
    /// `None` derives the constants from the affine coefficients.
    pub growth: Option<GrowthConstants>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    pub market: MarketSpec,
    pub lambda: f64,
    pub y0: f64,
    pub subordinator: SubordinatorSpec,
    pub condition_b_epsilon: f64,
    pub grid: SolverGrid,
    pub mc_paths: usize,
    pub seed: u64,
    pub mc_substep: Option<f64>,
    pub contraction_pairs: usize,
    pub contraction_paths: usize,
    pub jensen_paths: usize,
    pub simulate_paths: usize,
    pub simulate_steps: usize,
    pub wealth: f64,
    pub utility: Utility,
    pub output_dir: PathBuf,
}

const KEYS: &[&str] = &[
    "market.preset",
    "market.gamma",
    "market.horizon",
    "market.r",
    "market.mu",
    "market.sigma2",
    "market.growth",
    "ou.lambda",
    "ou.y0",
    "subordinator.family",
    "subordinator.intensity",
    "subordinator.jump_rate",
    "condition_b.epsilon",
    "grid.time_steps",
    "grid.y_steps",
    "grid.y_max",
    "grid.kappa",
    "grid.quad_nodes",
    "mc.n_paths",
    "mc.seed",
    "mc.substep",
    "contraction.pairs",
    "contraction.n_paths",
    "jensen.n_paths",
    "simulate.n_paths",
    "simulate.n_steps",
    "simulate.wealth",
    "simulate.utility",
    "output.dir",
];

const GROWTH_FIELDS: usize = 10;

fn preset_values(p: Preset) -> Vec<(&'static str, String)> {
    let model = match p {
        Preset::BnsExample => MarketModel::bns_example(),
        Preset::MertonConstant => MarketModel::merton_constant(),
    };
    let growth = match p {
        Preset::BnsExample => growth_to_string(model.growth()),
        Preset::MertonConstant => "auto".into(),
    };
    let affine = |c: &std::sync::Arc<dyn crate::market::Coefficient>| affine_to_string(&c.as_affine().expect("affine preset"));
    let mut v = vec![
        ("market.gamma", model.gamma().to_string()),
        ("market.horizon", model.horizon().to_string()),
        ("market.r", affine(model.r_coefficient())),
        ("market.mu", affine(model.mu_coefficient())),
        ("market.sigma2", affine(model.sigma2_coefficient())),
        ("market.growth", growth),
        ("ou.lambda", "1/6".into()),
        ("ou.y0", "0.2".into()),
    ];
    match p {
        Preset::BnsExample => {
            v.push(("subordinator.family", "compound-poisson-exp".into()));
            v.push(("subordinator.intensity", "0.5".into()));
            v.push(("subordinator.jump_rate", "15".into()));
        }
        Preset::MertonConstant => v.push(("subordinator.family", "null".into())),
    }
    v
}

fn defaults() -> Vec<(&'static str, String)> {
    let grid = SolverGrid::default();
    vec![
        ("condition_b.epsilon", DEFAULT_CONDITION_B_EPSILON.to_string()),
        ("grid.time_steps", grid.time_steps.to_string()),
        ("grid.y_steps", grid.y_steps.to_string()),
        ("grid.y_max", grid.y_max.to_string()),
        ("grid.kappa", "auto".into()),
        ("grid.quad_nodes", grid.quad_nodes.to_string()),
        ("market.growth", "auto".into()),
        ("mc.n_paths", "100000".into()),
        ("mc.seed", "2024".into()),
        ("mc.substep", "auto".into()),
        ("contraction.pairs", "10".into()),
        ("contraction.n_paths", "10000".into()),
        ("jensen.n_paths", "100000".into()),
        ("simulate.n_paths", "1".into()),
        ("simulate.n_steps", DEFAULT_STEPS.to_string()),
        ("simulate.wealth", "1".into()),
        ("simulate.utility", "power".into()),
        ("output.dir", "out".into()),
    ]
}

/// Parses a number, allowing `p/q`.
pub fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let (p, q) = (p.trim().parse::<f64>().ok()?, q.trim().parse::<f64>().ok()?);
        return (q != 0.0).then(|| p / q).filter(|v| v.is_finite());
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses `a + b*y`, `b*y`, `a - b*y`, `y` or a constant.
pub fn parse_affine(s: &str) -> Option<Affine> {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return None;
    }
    let mut terms = Vec::new();
    let mut current = String::new();
    let mut prev = ' ';
    for ch in compact.chars() {
        let exponent = matches!(prev, 'e' | 'E') && current.chars().next().is_some_and(|c| c != 'y');
        if (ch == '+' || ch == '-') && !current.is_empty() && !current.ends_with(['+', '-']) && !exponent {
            terms.push(std::mem::take(&mut current));
        }
        current.push(ch);
        prev = ch;
    }
    terms.push(current);
    let (mut intercept, mut slope) = (0.0, 0.0);
    let (mut seen_a, mut seen_b) = (false, false);
    for term in terms {
        let term = term.strip_prefix('+').unwrap_or(&term).to_string();
        if let Some(coef) = term.strip_suffix("*y").or_else(|| term.strip_suffix('y')) {
            let value = match coef {
                "" => 1.0,
                "-" => -1.0,
                c => parse_number(c)?,
            };
            if seen_b {
                return None;
            }
            slope = value;
            seen_b = true;
        } else {
            if seen_a {
                return None;
            }
            intercept = parse_number(&term)?;
            seen_a = true;
        }
    }
    Some(Affine::new(intercept, slope))
}

pub fn affine_to_string(a: &Affine) -> String {
    format!("{} + {}*y", a.intercept, a.slope)
}

fn growth_to_string(g: &GrowthConstants) -> String {
    [g.a_r, g.b_r, g.a_mu, g.b_mu, g.a_sigma, g.b_sigma, g.a, g.b, g.c, g.d]
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn parse_growth(s: &str) -> Option<Option<GrowthConstants>> {
    if s == "auto" {
        return Some(None);
    }
    let v: Vec<f64> = s.split(',').map(parse_number).collect::<Option<_>>()?;
    if v.len() != GROWTH_FIELDS {
        return None;
    }
    Some(Some(GrowthConstants {
        a_r: v[0],
        b_r: v[1],
        a_mu: v[2],
        b_mu: v[3],
        a_sigma: v[4],
        b_sigma: v[5],
        a: v[6],
        b: v[7],
        c: v[8],
        d: v[9],
    }))
}

fn unquote(v: &str) -> &str {
    let v = v.trim();
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v)
}

/// Splits text into `(line, key, value)` triples.
fn tokenize(text: &str, issues: &mut Vec<Issue>) -> Vec<(usize, String, String)> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = match raw.find(" #") {
            Some(i) => &raw[..i],
            None => raw,
        };
        let body = body.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        match body.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => out.push((line, k.trim().to_string(), unquote(v).to_string())),
            _ => issues.push(Issue::at(line, "config", format!("expected `key = value`, got `{body}`"))),
        }
    }
    out
}

impl RunConfig {
    /// Parses `text`, then applies `overrides` (from the command line) on
    /// top. Every problem is collected before failing.
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self, Vec<Issue>> {
        let mut issues = Vec::new();
        let mut explicit: BTreeMap<String, (Option<usize>, String)> = BTreeMap::new();
        for (line, key, value) in tokenize(text, &mut issues) {
            if !KEYS.contains(&key.as_str()) {
                issues.push(Issue::at(line, key, "unknown key"));
            } else if explicit.contains_key(&key) {
                issues.push(Issue::at(line, key, "duplicate key"));
            } else {
                explicit.insert(key, (Some(line), value));
            }
        }
        for (key, value) in overrides {
            if KEYS.contains(&key.as_str()) {
                explicit.insert(key.clone(), (None, value.clone()));
            } else {
                issues.push(Issue::new(key.clone(), "unknown key"));
            }
        }

        let mut values: BTreeMap<&str, (Option<usize>, String)> =
            defaults().into_iter().map(|(k, v)| (k, (None, v))).collect();
        let mut preset = None;
        if let Some((line, name)) = explicit.get("market.preset") {
            match Preset::parse(name) {
                Some(p) => {
                    preset = Some(p);
                    values.extend(preset_values(p).into_iter().map(|(k, v)| (k, (None, v))));
                }
                None => issues.push(Issue {
                    key: "market.preset".into(),
                    line: *line,
                    reason: format!("unknown preset `{name}`; expected bns-example or merton-constant"),
                }),
            }
        }
        for (key, v) in &explicit {
            if key != "market.preset" {
                let k = KEYS.iter().find(|k| **k == key.as_str()).unwrap();
                values.insert(k, v.clone());
            }
        }

        let mut reader = Reader { values: &values, issues: &mut issues };
        let cfg = reader.build(preset);
        if issues.is_empty() {
            Ok(cfg.expect("all keys read"))
        } else {
            Err(issues)
        }
    }

    /// Canonical text form; `parse(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        if let Some(p) = self.preset {
            put("market.preset", format!("\"{}\"", p.name()));
        }
        let m = &self.market;
        put("market.gamma", m.gamma.to_string());
        put("market.horizon", m.horizon.to_string());
        put("market.r", affine_to_string(&m.r));
        put("market.mu", affine_to_string(&m.mu));
        put("market.sigma2", affine_to_string(&m.sigma2));
        put("market.growth", m.growth.as_ref().map_or("auto".into(), growth_to_string));
        put("ou.lambda", self.lambda.to_string());
        put("ou.y0", self.y0.to_string());
        match self.subordinator {
            SubordinatorSpec::Null => put("subordinator.family", "null".into()),
            SubordinatorSpec::CompoundPoissonExp { intensity, jump_rate } => {
                put("subordinator.family", "compound-poisson-exp".into());
                put("subordinator.intensity", intensity.to_string());
                put("subordinator.jump_rate", jump_rate.to_string());
            }
        }
        put("condition_b.epsilon", self.condition_b_epsilon.to_string());
        put("grid.time_steps", self.grid.time_steps.to_string());
        put("grid.y_steps", self.grid.y_steps.to_string());
        put("grid.y_max", self.grid.y_max.to_string());
        put("grid.kappa", self.grid.kappa.map_or("auto".into(), |k| k.to_string()));
        put("grid.quad_nodes", self.grid.quad_nodes.to_string());
        put("mc.n_paths", self.mc_paths.to_string());
        put("mc.seed", self.seed.to_string());
        put("mc.substep", self.mc_substep.map_or("auto".into(), |h| h.to_string()));
        put("contraction.pairs", self.contraction_pairs.to_string());
        put("contraction.n_paths", self.contraction_paths.to_string());
        put("jensen.n_paths", self.jensen_paths.to_string());
        put("simulate.n_paths", self.simulate_paths.to_string());
        put("simulate.n_steps", self.simulate_steps.to_string());
        put("simulate.wealth", self.wealth.to_string());
        put("simulate.utility", self.utility.name().into());
        put("output.dir", format!("\"{}\"", self.output_dir.display()));
        out
    }

    pub fn model(&self) -> crate::Result<MarketModel> {
        let m = &self.market;
        MarketModel::affine(m.r, m.mu, m.sigma2, m.gamma, m.horizon, m.growth)
    }

    pub fn ou(&self) -> crate::Result<OuParams> {
        OuParams::new(self.lambda, self.y0, self.subordinator)
    }

    pub fn mc(&self) -> McConfig {
        let mut cfg = McConfig::new(self.mc_paths, self.seed, self.market.horizon);
        cfg.substep = self.mc_substep;
        cfg
    }

    /// Cross-module preconditions: model and OU construction, coefficient
    /// growth, condition B, derived constants, CFL, `κ > B''` and the Monte
    /// Carlo settings. Returns every failure.
    pub fn check(&self) -> Vec<Issue> {
        let mut issues = Vec::new();
        let mut record = |r: crate::Result<()>| {
            if let Err(e) = r {
                issues.push(Issue::from_error(&e));
            }
        };
        let model = self.model();
        let ou = self.ou();
        let (model, ou) = match (model, ou) {
            (Ok(m), Ok(o)) => (m, o),
            (m, o) => {
                record(m.map(|_| ()));
                record(o.map(|_| ()));
                return issues;
            }
        };
        record(model.check_growth(self.grid.y_max));
        let gate = check_condition_b(&ou, &model, self.condition_b_epsilon);
        if !gate.passed {
            record(Err(Error::ConditionBViolated {
                threshold: gate.threshold,
                jump_rate: ou.subordinator.exponential_moment_bound(),
            }));
        }
        match derive_constants(&model, &ou, DEFAULT_ALPHA_MARGIN) {
            Ok(c) => {
                let kappa = self.grid.kappa_for(&c);
                if kappa <= c.b_double {
                    record(Err(Error::KappaTooSmall {
                        kappa,
                        b_double: c.b_double,
                    }));
                }
            }
            Err(e) if gate.passed => record(Err(e)),
            Err(_) => {}
        }
        if self.grid.y_steps >= 2 && self.grid.y_max > 0.0 {
            let cfl = self.grid.cfl_number(&model, &ou);
            if cfl > CFL_LIMIT {
                record(Err(Error::CflViolated {
                    number: cfl,
                    limit: CFL_LIMIT,
                }));
            }
        }
        record(self.mc().validate(self.market.horizon));
        issues
    }
}

struct Reader<'a> {
    values: &'a BTreeMap<&'static str, (Option<usize>, String)>,
    issues: &'a mut Vec<Issue>,
}

impl Reader<'_> {
    fn raw(&mut self, key: &str) -> Option<(Option<usize>, String)> {
        match self.values.get(key) {
            Some(v) => Some(v.clone()),
            None => {
                self.issues.push(Issue::new(key, "missing; set it or choose a market.preset"));
                None
            }
        }
    }

    fn get<T>(&mut self, key: &str, what: &str, f: impl Fn(&str) -> Option<T>) -> Option<T> {
        let (line, v) = self.raw(key)?;
        let parsed = f(&v);
        if parsed.is_none() {
            self.issues.push(Issue {
                key: key.into(),
                line,
                reason: format!("expected {what}, got `{v}`"),
            });
        }
        parsed
    }

    fn number(&mut self, key: &str) -> Option<f64> {
        self.get(key, "a number", parse_number)
    }

    fn count(&mut self, key: &str) -> Option<usize> {
        self.get(key, "a nonnegative integer", |s| s.parse().ok())
    }

    fn auto_number(&mut self, key: &str) -> Option<Option<f64>> {
        self.get(key, "a number or `auto`", |s| if s == "auto" { Some(None) } else { parse_number(s).map(Some) })
    }

    fn build(&mut self, preset: Option<Preset>) -> Option<RunConfig> {
        let gamma = self.number("market.gamma");
        let horizon = self.number("market.horizon");
        let r = self.get("market.r", "an affine form `a + b*y`", parse_affine);
        let mu = self.get("market.mu", "an affine form `a + b*y`", parse_affine);
        let sigma2 = self.get("market.sigma2", "an affine form `a + b*y`", parse_affine);
        let growth = self.get("market.growth", "`auto` or ten comma-separated numbers", parse_growth);
        let lambda = self.number("ou.lambda");
        let y0 = self.number("ou.y0");
        let family = self.get("subordinator.family", "`compound-poisson-exp` or `null`", |s| {
            matches!(s, "compound-poisson-exp" | "null").then(|| s.to_string())
        });
        let subordinator = match family.as_deref() {
            Some("null") => Some(SubordinatorSpec::Null),
            Some(_) => {
                let c = self.number("subordinator.intensity");
                let eta = self.number("subordinator.jump_rate");
                match (c, eta) {
                    (Some(c), Some(eta)) => match SubordinatorSpec::compound_poisson_exp(c, eta) {
                        Ok(s) => Some(s),
                        Err(e) => {
                            self.issues.push(Issue::from_error(&e));
                            None
                        }
                    },
                    _ => None,
                }
            }
            None => None,
        };
        let condition_b_epsilon = self.number("condition_b.epsilon");
        let grid = (|| {
            Some(SolverGrid {
                time_steps: self.count("grid.time_steps")?,
                y_steps: self.count("grid.y_steps")?,
                y_max: self.number("grid.y_max")?,
                kappa: self.auto_number("grid.kappa")?,
                quad_nodes: self.count("grid.quad_nodes")?,
            })
        })();
        let mc_paths = self.count("mc.n_paths");
        let seed = self.get("mc.seed", "an unsigned integer", |s| s.parse::<u64>().ok());
        let mc_substep = self.auto_number("mc.substep");
        let contraction_pairs = self.count("contraction.pairs");
        let contraction_paths = self.count("contraction.n_paths");
        let jensen_paths = self.count("jensen.n_paths");
        let simulate_paths = self.count("simulate.n_paths");
        let simulate_steps = self.count("simulate.n_steps");
        let wealth = self.number("simulate.wealth");
        let utility = self.get("simulate.utility", "`power` or `log`", |s| match s {
            "power" => Some(Utility::Power),
            "log" => Some(Utility::Log),
            _ => None,
        });
        let output_dir = self.raw("output.dir").map(|(_, v)| PathBuf::from(v));

        let cfg = RunConfig {
            preset,
            market: MarketSpec {
                gamma: gamma?,
                horizon: horizon?,
                r: r?,
                mu: mu?,
                sigma2: sigma2?,
                growth: growth?,
            },
            lambda: lambda?,
            y0: y0?,
            subordinator: subordinator?,
            condition_b_epsilon: condition_b_epsilon?,
            grid: grid?,
            mc_paths: mc_paths?,
            seed: seed?,
            mc_substep: mc_substep?,
            contraction_pairs: contraction_pairs?,
            contraction_paths: contraction_paths?,
            jensen_paths: jensen_paths?,
            simulate_paths: simulate_paths?,
            simulate_steps: simulate_steps?,
            wealth: wealth?,
            utility: utility?,
            output_dir: output_dir?,
        };
        Some(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> RunConfig {
        RunConfig::parse(text, &[]).unwrap()
    }

    #[test]
    fn preset_matches_library_models() {
        let cfg = parse("market.preset = \"bns-example\"\n");
        let model = cfg.model().unwrap();
        let reference = MarketModel::bns_example();
        assert_eq!(model.growth(), reference.growth());
        assert_eq!(model.gamma(), 0.75);
        assert_eq!(cfg.lambda, 1.0 / 6.0);
        assert_eq!(cfg.subordinator, SubordinatorSpec::compound_poisson_exp(0.5, 15.0).unwrap());
        assert!(cfg.check().is_empty());
        let merton = parse("market.preset = merton-constant");
        assert_eq!(merton.subordinator, SubordinatorSpec::Null);
        assert!((merton.model().unwrap().q(0.3) - 0.04).abs() < 1e-15);
    }

    #[test]
    fn explicit_keys_override_the_preset() {
        let cfg = parse("market.preset = bns-example\nou.y0 = 0.5 # start higher\nsubordinator.jump_rate = 20\n");
        assert_eq!(cfg.y0, 0.5);
        assert_eq!(cfg.subordinator, SubordinatorSpec::compound_poisson_exp(0.5, 20.0).unwrap());
        let cli = RunConfig::parse("market.preset = bns-example", &[("mc.seed".into(), "7".into())]).unwrap();
        assert_eq!(cli.seed, 7);
    }

    #[test]
    fn affine_forms() {
        assert_eq!(parse_affine("0.1 + 0.5*y"), Some(Affine::new(0.1, 0.5)));
        assert_eq!(parse_affine("0.1 - 0.5 * y"), Some(Affine::new(0.1, -0.5)));
        assert_eq!(parse_affine("0.1 + -0.5*y"), Some(Affine::new(0.1, -0.5)));
        assert_eq!(parse_affine("y"), Some(Affine::new(0.0, 1.0)));
        assert_eq!(parse_affine("-y + 2"), Some(Affine::new(2.0, -1.0)));
        assert_eq!(parse_affine("1e-3 + 2.5e-2*y"), Some(Affine::new(1e-3, 2.5e-2)));
        assert_eq!(parse_affine("0.04"), Some(Affine::constant(0.04)));
        assert_eq!(parse_affine("1 + 2"), None);
        assert_eq!(parse_affine("y*y"), None);
        assert_eq!(parse_affine(""), None);
    }

    #[test]
    fn numbers_accept_fractions() {
        assert_eq!(parse_number("1/6"), Some(1.0 / 6.0));
        assert_eq!(parse_number(" 2.5 "), Some(2.5));
        assert_eq!(parse_number("1/0"), None);
        assert_eq!(parse_number("inf"), None);
    }

    #[test]
    fn round_trip_is_idempotent() {
        let cfg = parse("market.preset = bns-example\ngrid.kappa = 3.5\nmc.substep = 1/256\n");
        let text = cfg.to_text();
        let again = parse(&text);
        assert_eq!(again, cfg);
        assert_eq!(again.to_text(), text);
    }

    #[test]
    fn every_problem_is_reported_with_its_key() {
        let err = RunConfig::parse(
            "market.preset = bns-example\nmarket.gamma = lots\nbogus.key = 1\ngrid.y_steps = -4\nthis line is broken\n",
            &[],
        )
        .unwrap_err();
        let keys: Vec<&str> = err.iter().map(|i| i.key.as_str()).collect();
        assert!(keys.contains(&"market.gamma"));
        assert!(keys.contains(&"bogus.key"));
        assert!(keys.contains(&"grid.y_steps"));
        assert!(keys.contains(&"config"));
        assert!(err.iter().all(|i| i.line.is_some()));
    }

    #[test]
    fn missing_market_without_preset() {
        let err = RunConfig::parse("ou.y0 = 0.2\n", &[]).unwrap_err();
        assert!(err.iter().any(|i| i.key == "market.gamma"));
        assert!(err.iter().any(|i| i.key == "subordinator.family"));
    }

    #[test]
    fn cross_module_preconditions_are_collected() {
        let cfg = parse("market.preset = bns-example\nsubordinator.jump_rate = 1\ngrid.time_steps = 10\n");
        let keys: Vec<String> = cfg.check().into_iter().map(|i| i.key).collect();
        assert!(keys.contains(&"subordinator.jump_rate".to_string()));
        assert!(keys.contains(&"grid.time_steps".to_string()));
        let cfg = parse("market.preset = bns-example\ngrid.kappa = 0.01\nmc.n_paths = 5\n");
        let keys: Vec<String> = cfg.check().into_iter().map(|i| i.key).collect();
        assert_eq!(keys, vec!["grid.kappa".to_string(), "mc.n_paths".to_string()]);
    }
}
