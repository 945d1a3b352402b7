use star_rsma::ao::{initialize, run, run_with_model, step, AoSettings, DesignModel};
use star_rsma::channel::draw_channels;
use star_rsma::hwi_stats::PhaseNoiseStats;
use star_rsma::scenario::{rng_for, ScenarioConfig, Stream};

#[test]
fn surrogate_trace_is_monotone_over_thirty_cycles() {
    let cfg = ScenarioConfig { seed: 11, ..ScenarioConfig::default() };
    let (_, ch) = draw_channels(&cfg).unwrap();
    let model = DesignModel::for_config(&cfg);
    let settings = AoSettings::default();
    let mut state = initialize(&cfg, &ch, &mut rng_for(cfg.seed, Stream::Init), &model).unwrap();
    for _ in 0..30 {
        state = step(&state, &ch, &model, &settings).unwrap();
    }
    let trace = &state.objective_trace;
    for w in trace.windows(2) {
        assert!(w[1].surrogate >= w[0].surrogate - settings.eta, "{} -> {}", w[0].surrogate, w[1].surrogate);
        assert!(w[1].objective_bits >= w[0].objective_bits - 1e-12);
    }
}

#[test]
fn default_run_is_deterministic_and_ascends() {
    let cfg = ScenarioConfig::default();
    let (_, ch) = draw_channels(&cfg).unwrap();
    let a = run(&cfg, &ch).unwrap();
    let b = run(&cfg, &ch).unwrap();
    assert_eq!(a.trace.len(), b.trace.len());
    for (x, y) in a.trace.iter().zip(&b.trace) {
        assert_eq!(x.objective_bits, y.objective_bits);
        assert_eq!(x.surrogate, y.surrogate);
    }
    assert!(a.converged && a.iterations <= 100);
    assert!(a.design_objective_bits >= a.initial_objective_bits);
}

/// Exhaustive search for M = 1, N = 1, two users, no impairments: every
/// SINR depends only on the stream powers and on |t_k|, which is largest
/// when the element phase aligns with the direct link on each side.
fn brute_force(cfg: &ScenarioConfig, direct: [f64; 2], cascade: [f64; 2]) -> f64 {
    let s = cfg.sigma2();
    let steps = 100;
    let mut best = 0.0f64;
    for ia in 0..=200 {
        let theta = std::f64::consts::FRAC_PI_2 * ia as f64 / 200.0;
        let amp = [theta.cos(), theta.sin()];
        let gain: Vec<f64> = (0..2).map(|k| (direct[k] + amp[k] * cascade[k]).powi(2)).collect();
        for i in 0..=steps {
            for j in 0..=steps - i {
                let p = [cfg.p_max * i as f64 / steps as f64, cfg.p_max * j as f64 / steps as f64];
                let pc = cfg.p_max - p[0] - p[1];
                let mut rate = 0.0;
                let mut common = f64::INFINITY;
                for k in 0..2 {
                    let interference = p[1 - k] * gain[k];
                    rate += (1.0 + p[k] * gain[k] / (interference + s)).log2();
                    common = common.min((1.0 + pc * gain[k] / ((p[0] + p[1]) * gain[k] + s)).log2());
                }
                best = best.max(rate + common);
            }
        }
    }
    best
}

#[test]
fn single_element_run_matches_exhaustive_search() {
    let cfg = ScenarioConfig { m: 1, n: 1, k: 2, k0: 1, mu_t: 0.0, mu_r: 0.0, ..ScenarioConfig::default() };
    for seed in [1, 2, 3] {
        let cfg = ScenarioConfig { seed, ..cfg.clone() };
        let (_, ch) = draw_channels(&cfg).unwrap();
        let direct = [ch.h[0][0].norm(), ch.h[1][0].norm()];
        let cascade = [(ch.bs_ris[(0, 0)] * ch.g[0][0]).norm(), (ch.bs_ris[(0, 0)] * ch.g[1][0]).norm()];
        let oracle = brute_force(&cfg, direct, cascade);
        let model = DesignModel { config: cfg.clone(), phase: PhaseNoiseStats::noise_free(1) };
        let r = run_with_model(&cfg, &ch, &model, &AoSettings::default()).unwrap();
        let rel = (r.objective_bits - oracle).abs() / oracle;
        assert!(rel < 0.02, "seed {seed}: ao {} vs grid {oracle}", r.objective_bits);
    }
}
