use std::sync::OnceLock;

use proptest::prelude::*;

use levy_merton::cli::RunConfig;
use levy_merton::levy::stream_rng;
use levy_merton::market::{derive_constants, Affine, DEFAULT_ALPHA_MARGIN};
use levy_merton::oracle::{self, McConfig};
use levy_merton::pide::{self, Stepper};
use levy_merton::strategy::{simulate_log, simulate_power_on, simulate_with_policy, Noise, PowerOptimal};
use levy_merton::{FactorPath, JumpEvent, MarketModel, OuParams, Regime, SolverGrid, SubordinatorSpec, ValueSurface};

fn bns_ou() -> OuParams {
    OuParams::new(1.0 / 6.0, 0.2, SubordinatorSpec::compound_poisson_exp(0.5, 15.0).unwrap()).unwrap()
}

fn bns_surface() -> &'static ValueSurface {
    static SURFACE: OnceLock<ValueSurface> = OnceLock::new();
    SURFACE.get_or_init(|| {
        pide::solve(&MarketModel::bns_example(), &bns_ou(), &SolverGrid::new(2000, 100, 2.0))
            .unwrap()
            .surface
    })
}

fn affine_market() -> impl Strategy<Value = MarketModel> {
    (
        (0.0..0.1f64, 0.0..0.2f64),
        (0.0..0.3f64, 0.0..1.0f64),
        (0.01..0.5f64, 0.0..2.0f64),
        0.1..0.9f64,
    )
        .prop_map(|(r, mu, s2, gamma)| {
            MarketModel::affine(
                Affine::new(r.0, r.1),
                Affine::new(mu.0, mu.1),
                Affine::new(s2.0, s2.1),
                gamma,
                1.0,
                None,
            )
            .unwrap()
        })
}

fn compound_poisson() -> impl Strategy<Value = SubordinatorSpec> {
    (0.05..3.0f64, 2.0..40.0f64).prop_map(|(c, eta)| SubordinatorSpec::compound_poisson_exp(c, eta).unwrap())
}

fn regime_class(r: Regime) -> u8 {
    match r {
        Regime::D1 | Regime::Boundary12 => 1,
        Regime::D2 => 2,
        Regime::D3 | Regime::Boundary23 => 3,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn laplace_exponent_is_zero_at_origin_increasing_and_convex(
        spec in compound_poisson(),
        u in 0.0..0.95f64,
        v in 0.0..0.95f64,
    ) {
        let eta = match spec {
            SubordinatorSpec::CompoundPoissonExp { jump_rate, .. } => jump_rate,
            SubordinatorSpec::Null => unreachable!(),
        };
        let psi = |w: f64| spec.laplace_exponent(w).to_f64();
        prop_assert_eq!(psi(0.0), 0.0);
        let (a, b) = (u.min(v) * eta, u.max(v) * eta);
        prop_assert!(psi(a) <= psi(b));
        prop_assert!(psi(0.5 * (a + b)) <= 0.5 * (psi(a) + psi(b)) * (1.0 + 1e-12));
        prop_assert!(!spec.laplace_exponent(eta).is_finite());
    }

    #[test]
    fn factor_stays_between_decay_and_decay_plus_jumps(
        spec in compound_poisson(),
        lambda in 0.05..3.0f64,
        y in 0.01..2.0f64,
        seed in any::<u64>(),
    ) {
        let ou = OuParams::new(lambda, y, spec).unwrap();
        let p = FactorPath::evolve(&ou, 0.0, 1.0, &mut stream_rng(seed, 0)).unwrap();
        for k in 0..=200 {
            let u = k as f64 / 200.0;
            let level = p.level(u);
            let floor = y * (-lambda * u).exp();
            prop_assert!(level > 0.0);
            prop_assert!(level >= floor * (1.0 - 1e-14));
            prop_assert!(level <= y + p.jump_mass(0.0, u) + 1e-14);
        }
        let residual = lambda * p.integrated_level(0.0, 1.0).unwrap() + p.level(1.0) - y - p.jump_mass(0.0, 1.0);
        prop_assert!(residual.abs() <= 1e-12 * (1.0 + y + p.jump_mass(0.0, 1.0)));
    }

    #[test]
    fn factor_restarted_midway_follows_the_same_path(
        spec in compound_poisson(),
        lambda in 0.05..3.0f64,
        y in 0.01..2.0f64,
        split in 0.05..0.95f64,
        seed in any::<u64>(),
    ) {
        let ou = OuParams::new(lambda, y, spec).unwrap();
        let whole = FactorPath::evolve(&ou, 0.0, 1.0, &mut stream_rng(seed, 1)).unwrap();
        let rest: Vec<JumpEvent> = whole.jumps().iter().copied().filter(|j| j.time > split).collect();
        let tail = FactorPath::with_jumps(lambda, split, whole.level(split), 1.0, rest).unwrap();
        for k in 0..=50 {
            let u = split + (1.0 - split) * k as f64 / 50.0;
            prop_assert!((tail.level(u) - whole.level(u)).abs() <= 1e-12 * (1.0 + whole.level(u)));
        }
    }

    #[test]
    fn q_lies_between_rate_and_linear_bound(model in affine_market(), y in 0.001..5.0f64) {
        let q = model.q(y);
        let g = model.growth();
        prop_assert!(0.0 <= model.r(y));
        prop_assert!(model.r(y) <= q + 1e-15);
        prop_assert!(q <= g.a + g.b * y + 1e-12);
        if model.classify_regime(y).unwrap() == Regime::D2 {
            prop_assert!(q <= 0.5 * (model.mu(y) + model.r(y)) + 1e-15);
        }
    }

    #[test]
    fn fraction_beats_every_grid_fraction(model in affine_market(), y in 0.001..5.0f64) {
        let gamma = model.gamma();
        let (r, mu, s2) = (model.r(y), model.mu(y), model.sigma2(y));
        let gain = |pi: f64| pi * (mu - r) - 0.5 * pi * pi * (1.0 - gamma) * s2;
        let pi = model.fraction(y);
        prop_assert!((0.0..=1.0).contains(&pi));
        let best = gain(pi);
        for k in 0..=1000 {
            prop_assert!(gain(k as f64 / 1000.0) <= best + 1e-14);
        }
        prop_assert!((model.q(y) - (r + best)).abs() <= 1e-12 * (1.0 + model.q(y).abs()));
    }

    #[test]
    fn q_is_continuous_across_regime_changes(model in affine_market()) {
        let ys: Vec<f64> = (1..=2000).map(|k| k as f64 * 0.0025).collect();
        for w in ys.windows(2) {
            let (ra, rb) = (regime_class(model.classify_regime(w[0]).unwrap()), regime_class(model.classify_regime(w[1]).unwrap()));
            if ra == rb {
                continue;
            }
            let (mut lo, mut hi) = (w[0], w[1]);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if regime_class(model.classify_regime(mid).unwrap()) == ra {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let jump = (model.q(hi) - model.q(lo)).abs();
            prop_assert!(jump <= 1e-10, "Q jumps by {} at y = {}", jump, lo);
        }
    }

    #[test]
    fn config_text_round_trips(
        gamma in 0.05..0.95f64,
        horizon in 0.1..5.0f64,
        lambda in 0.01..3.0f64,
        y0 in 0.01..2.0f64,
        intensity in 0.01..5.0f64,
        eta in 1.0..50.0f64,
        m in 10usize..20000,
        j in 2usize..2000,
        seed in any::<u64>(),
        null in any::<bool>(),
    ) {
        let mut overrides = vec![
            ("market.gamma", gamma.to_string()),
            ("market.horizon", horizon.to_string()),
            ("market.growth", "auto".to_string()),
            ("ou.lambda", lambda.to_string()),
            ("ou.y0", y0.to_string()),
            ("grid.time_steps", m.to_string()),
            ("grid.y_steps", j.to_string()),
            ("mc.seed", seed.to_string()),
        ];
        if null {
            overrides.push(("subordinator.family", "null".into()));
        } else {
            overrides.push(("subordinator.intensity", intensity.to_string()));
            overrides.push(("subordinator.jump_rate", eta.to_string()));
        }
        let overrides: Vec<(String, String)> = overrides.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        let cfg = RunConfig::parse("market.preset = bns-example\n", &overrides).unwrap();
        let text = cfg.to_text();
        let again = RunConfig::parse(&text, &[]).unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(again.to_text(), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn backward_step_preserves_order(seed in any::<u64>(), bump in 0.0..0.5f64) {
        let model = MarketModel::bns_example();
        let ou = bns_ou();
        let d = derive_constants(&model, &ou, DEFAULT_ALPHA_MARGIN).unwrap();
        let probe = SolverGrid::new(100, 80, 2.0);
        let steps = (100.0 * probe.cfl_number(&model, &ou) / 0.45).ceil() as usize;
        let grid = SolverGrid::new(steps, 80, 2.0);
        prop_assert!(grid.cfl_number(&model, &ou) <= 0.45);
        let stepper = Stepper::new(&model, &ou, &grid, grid.kappa_for(&d), d.b_prime).unwrap();
        let mut rng = stream_rng(seed, 3);
        let lower: Vec<f64> = (1..=80)
            .map(|k| 1.0 + rand::Rng::random::<f64>(&mut rng) * (d.envelope_upper(0.5, k as f64 * 0.025) - 1.0))
            .collect();
        let upper: Vec<f64> = lower
            .iter()
            .map(|&v| v + bump * rand::Rng::random::<f64>(&mut rng))
            .collect();
        let (mut a, mut b) = (vec![0.0; 80], vec![0.0; 80]);
        stepper.step(&lower, &mut a);
        stepper.step(&upper, &mut b);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(x <= y, "{} > {}", x, y);
        }
    }

    #[test]
    fn log_consumption_ratio_ignores_market_and_factor(
        model in affine_market(),
        spec in compound_poisson(),
        seed in any::<u64>(),
        x0 in 0.01..100.0f64,
    ) {
        let ou = OuParams::new(0.5, 0.3, spec).unwrap();
        let path = simulate_log(&model, &ou, 200, x0, &mut stream_rng(seed, 0)).unwrap();
        for (t, ratio) in path.times.iter().zip(&path.consumption_ratio) {
            prop_assert_eq!(*ratio, 1.0 / (1.0 + model.horizon() - t));
        }
        prop_assert!(path.wealth.iter().all(|&x| x > 0.0 && x.is_finite()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn power_wealth_stays_positive(seed in any::<u64>(), x0 in 1e-3..1e3f64) {
        let model = MarketModel::bns_example();
        let noise = Noise::sample(&bns_ou(), 1.0, 500, &mut stream_rng(seed, 0)).unwrap();
        let path = simulate_power_on(bns_surface(), &model, &noise, x0).unwrap();
        prop_assert!(path.wealth.iter().all(|&x| x > 0.0 && x.is_finite()));
        prop_assert!(path.consumption.iter().all(|&c| c > 0.0));
    }

    #[test]
    fn controls_do_not_see_future_jumps(seed in any::<u64>(), at in 0.01..0.99f64, size in 0.01..0.5f64) {
        let model = MarketModel::bns_example();
        let noise = Noise::sample(&bns_ou(), 1.0, 400, &mut stream_rng(seed, 0)).unwrap();
        let mut jumps = noise.factor.jumps().to_vec();
        jumps.push(JumpEvent { time: at, size });
        jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
        let f = &noise.factor;
        let shocked = Noise {
            factor: FactorPath::with_jumps(f.reversion(), 0.0, f.initial_level(), 1.0, jumps).unwrap(),
            increments: noise.increments.clone(),
        };
        let policy = PowerOptimal { surface: bns_surface(), model: &model };
        let a = simulate_with_policy(&policy, &model, &noise, 1.0).unwrap();
        let b = simulate_with_policy(&policy, &model, &shocked, 1.0).unwrap();
        for k in 0..a.times.len() {
            if a.times[k] > at {
                prop_assert!(a.wealth[k] != b.wealth[k] || a.consumption[k] != b.consumption[k]);
                break;
            }
            prop_assert_eq!(a.wealth[k], b.wealth[k]);
            prop_assert_eq!(a.consumption[k], b.consumption[k]);
            prop_assert_eq!(a.fraction[k], b.fraction[k]);
        }
    }

    #[test]
    fn operator_maps_the_band_into_itself(seed in any::<u64>(), t in 0.0..0.9f64, y in 0.05..1.0f64) {
        let model = MarketModel::bns_example();
        let ou = bns_ou();
        let d = derive_constants(&model, &ou, DEFAULT_ALPHA_MARGIN).unwrap();
        let lattice = oracle::band_lattice(1.0).unwrap();
        let f = oracle::random_band_surface(lattice, &d, &mut stream_rng(seed, 5));
        let mut cfg = McConfig::new(2000, seed, 1.0);
        cfg.probe_points = vec![(t, y)];
        let p = oracle::apply_operator(&f, &model, &ou, &cfg).unwrap()[0];
        prop_assert!(p.estimate >= 1.0 - 3.0 * p.std_error - 1e-12);
        prop_assert!(p.estimate <= p.envelope + 3.0 * p.std_error);
    }
}
