//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=1,2,7` restricts the run to the listed criteria.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use star_rsma::ao::{run_with, AoResult, AoSettings};
use star_rsma::channel::{draw_channels, ChannelSet};
use star_rsma::conic::cone::{distance_to_cone, distance_to_dual_cone, project_primal};
use star_rsma::conic::{solve, Cone, ConicProblem, Settings, Status};
use star_rsma::experiments::{
    check_correlation, check_cross_moment, check_first_moment, run_sweep, CheckOutcome, Scheme, SweepAxis, SweepResult, SweepSpec,
};
use star_rsma::fp::{fp_objective, true_objective_nats, update_aux};
use star_rsma::hwi_stats::{EffectiveChannelStats, PhaseNoiseStats};
use star_rsma::rates::{average_sinr, distortion_covariances, instantaneous_sinr, rate_bits, user_terms, Precoder, StarCoefficients};
use star_rsma::scenario::{rng_for, ScenarioConfig, Stream};
use star_rsma::subproblems::{build_lifted_matrices, sca_common_rate_bound, ScaState};
use star_rsma::{CMatrix, CVector};
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::time::Instant;

const DRAWS: usize = 20;
const ETA: f64 = 1e-5;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn cn<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * FRAC_1_SQRT_2
}

fn random_star<R: Rng + ?Sized>(n: usize, rng: &mut R) -> StarCoefficients {
    let split: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    StarCoefficients {
        v_t: CVector::from_fn(n, |i, _| Complex64::from_polar(split[i].sqrt(), rng.gen_range(0.0..2.0 * PI))),
        v_r: CVector::from_fn(n, |i, _| Complex64::from_polar((1.0 - split[i]).sqrt(), rng.gen_range(0.0..2.0 * PI))),
    }
}

/// Random beams on the power sphere `P_max` with a random stream split.
fn random_precoder<R: Rng + ?Sized>(m: usize, k: usize, p_max: f64, rng: &mut R) -> Precoder {
    let mut p = Precoder {
        f_private: CMatrix::from_fn(m, k, |_, _| cn(rng)),
        f_common: CVector::from_fn(m, |_, _| cn(rng)),
        c_alloc: DVector::zeros(k),
    };
    let scale = (p_max * rng.gen_range(0.2..1.0) / p.power()).sqrt();
    p.f_private *= Complex64::new(scale, 0.0);
    p.f_common *= Complex64::new(scale, 0.0);
    p
}

fn channels(seed: u64) -> ChannelSet {
    draw_channels(&ScenarioConfig { seed, ..ScenarioConfig::default() }).unwrap().1
}

fn c1() -> Verdict {
    let stats = PhaseNoiseStats::closed_form(2);
    let mut rng = rng_for(101, Stream::PhaseNoise);
    let first = check_first_moment(1_000_000, &stats, &mut rng);
    let cross = check_cross_moment(1_000_000, &stats, &mut rng);
    let pass = first.outcome == CheckOutcome::Pass && cross.outcome == CheckOutcome::Pass;
    verdict(pass, format!("first moment |z| = {:.2}, cross moment |z| = {:.2} (limit 3 SE)", first.measured, cross.measured))
}

fn c2() -> Verdict {
    let cfg = ScenarioConfig::default();
    let mut rng = rng_for(202, Stream::PhaseNoise);
    let r = check_correlation(&cfg, 50, 100_000, &PhaseNoiseStats::closed_form(cfg.n), &mut rng);
    verdict(r.outcome == CheckOutcome::Pass, format!("worst relative Frobenius error {:.3e} (limit 1e-2), {}", r.measured, r.detail))
}

fn c3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (m, k) = (rng.gen_range(1..6), rng.gen_range(2..6));
        let t = CVector::from_fn(m, |_, _| cn(&mut rng) * rng.gen_range(0.1..3.0));
        let precoder = random_precoder(m, k, 5.0, &mut rng);
        let (mu_t, mu_r, sigma2) = (rng.gen_range(0.0..0.2), rng.gen_range(0.0..0.2), rng.gen_range(0.01..2.0));
        let user = rng.gen_range(0..k);
        let inst = instantaneous_sinr(&t, &precoder, mu_t, mu_r, sigma2, user);
        let avg = average_sinr(&(&t * t.adjoint()), &precoder, mu_t, mu_r, sigma2, user).unwrap();
        worst = worst.max(((inst.0 - avg.0) / inst.0).abs()).max(((inst.1 - avg.1) / inst.1).abs());
    }
    verdict(worst <= 1e-12, format!("worst relative SINR difference {worst:.2e} over 1000 draws (limit 1e-12)"))
}

fn c4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let cfg = ScenarioConfig {
            mu_t: rng.gen_range(0.0..0.1),
            mu_r: rng.gen_range(0.0..0.1),
            p_max: rng.gen_range(1.0..15.0),
            ..ScenarioConfig::default()
        };
        let ch = channels(1000 + i);
        let star = random_star(cfg.n, &mut rng);
        let stats = EffectiveChannelStats::compute(&ch, &star, &PhaseNoiseStats::closed_form(cfg.n)).unwrap();
        let mut precoder = random_precoder(cfg.m, cfg.k, cfg.p_max, &mut rng);
        precoder.c_alloc = DVector::from_fn(cfg.k, |_, _| rng.gen_range(0.0..0.3));
        let aux = update_aux(&stats, &precoder, &cfg).unwrap();
        let fp = fp_objective(&stats, &precoder, &aux, &cfg);
        let exact = true_objective_nats(&stats, &precoder, &cfg).unwrap();
        worst = worst.max((fp - exact).abs());
    }
    verdict(worst <= 1e-10, format!("worst |f_R(a*, b*) - sum rate| = {worst:.2e} nats over 1000 instances (limit 1e-10)"))
}

fn c5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let cfg = ScenarioConfig::default();
    let phase = PhaseNoiseStats::closed_form(cfg.n);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let ch = channels(2000 + i);
        let star = random_star(cfg.n, &mut rng);
        let precoder = random_precoder(cfg.m, cfg.k, cfg.p_max, &mut rng);
        let stats = EffectiveChannelStats::compute(&ch, &star, &phase).unwrap();
        let terms = user_terms(&stats, &precoder, cfg.mu_t, cfg.mu_r, cfg.noise_floor());
        let lifted = build_lifted_matrices(&ch, &precoder, &phase, &cfg).unwrap();
        for (k, t) in terms.iter().enumerate() {
            let side = star.side(ch.uses_transmit_side(k));
            let u = CVector::from_fn(cfg.n + 1, |j, _| if j < cfg.n { side[j] } else { Complex64::new(1.0, 0.0) });
            let quad = |x: &CMatrix| (u.adjoint() * x * &u)[(0, 0)].re;
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
            worst = worst
                .max(rel(quad(&lifted.q_bar[k]), t.private_gain))
                .max(rel(quad(&lifted.s_bar[k]), t.distorted_total))
                .max(rel(quad(&lifted.w_bar[k]), t.common_gain));
        }
    }
    verdict(worst <= 1e-9, format!("worst relative trace mismatch {worst:.2e} over 100 points x 4 users x 3 identities (limit 1e-9)"))
}

fn c6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let cfg = ScenarioConfig::default();
    let phase = PhaseNoiseStats::closed_form(cfg.n);
    let (mut worst_excess, mut worst_tangent) = (f64::NEG_INFINITY, 0.0f64);
    for i in 0..100 {
        let ch = channels(3000 + i);
        let star = random_star(cfg.n, &mut rng);
        let stats = EffectiveChannelStats::compute(&ch, &star, &phase).unwrap();
        let anchor = random_precoder(cfg.m, cfg.k, cfg.p_max, &mut rng);
        let sca = ScaState::from_precoder(&anchor, cfg.mu_t, cfg.mu_r);
        let mut check = |p: &Precoder, at_anchor: bool| {
            let dist = distortion_covariances(p, cfg.mu_t, cfg.mu_r);
            let fc = &p.f_common * p.f_common.adjoint();
            let terms = user_terms(&stats, p, cfg.mu_t, cfg.mu_r, cfg.noise_floor());
            for (k, t) in stats.t_bar.iter().enumerate() {
                let bound = sca_common_rate_bound(t, &sca, &dist, &fc, &cfg);
                let exact = rate_bits(terms[k].sinr_common().unwrap());
                if at_anchor {
                    worst_tangent = worst_tangent.max((bound - exact).abs());
                } else {
                    worst_excess = worst_excess.max(bound - exact);
                }
            }
        };
        check(&anchor, true);
        for _ in 0..100 {
            check(&random_precoder(cfg.m, cfg.k, cfg.p_max, &mut rng), false);
        }
    }
    let pass = worst_excess <= 1e-9 && worst_tangent <= 1e-10;
    verdict(pass, format!("max(bound - rate) = {worst_excess:.2e} over 10^4 candidates x 4 users, tangency error {worst_tangent:.2e}"))
}

fn problem(c: &[f64], a_rows: &[&[f64]], b: &[f64], cones: Vec<Cone>) -> ConicProblem {
    let a = DMatrix::from_fn(a_rows.len(), c.len(), |i, j| a_rows[i][j]);
    ConicProblem::new(DVector::from_column_slice(c), a, DVector::from_column_slice(b), cones).unwrap()
}

/// Random problem with a known optimum from the Moreau decomposition of a
/// random point.
fn random_feasible(rng: &mut ChaCha8Rng, cones: Vec<Cone>, n: usize) -> ConicProblem {
    let m: usize = cones.iter().map(Cone::dim).sum();
    let a = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let z: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
    let mut s = z.clone();
    project_primal(&cones, &mut s);
    let y = DVector::from_iterator(m, s.iter().zip(&z).map(|(a, b)| a - b));
    let x = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let b = &a * &x + DVector::from_vec(s);
    let c = -a.tr_mul(&y);
    ConicProblem::new(c, a, b, cones).unwrap()
}

fn c7() -> Verdict {
    let settings = Settings::default();
    let sdp = problem(
        &[1.0, 0.0, 1.0],
        &[&[1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0], &[0.0, -SQRT_2, 0.0], &[0.0, 0.0, -1.0]],
        &[1.0, 0.0, 0.0, 0.0],
        vec![Cone::Zero(1), Cone::Psd(2)],
    );
    let soc = problem(&[1.0], &[&[-1.0], &[0.0], &[0.0]], &[0.0, 3.0, 4.0], vec![Cone::Soc(3)]);
    let exp = problem(&[1.0, 1.0], &[&[0.0, 1.0], &[0.0, 0.0], &[-1.0, 0.0]], &[0.0, 1.0, 0.0], vec![Cone::Exp]);
    let mut analytic: f64 = 0.0;
    for (p, want) in [(&sdp, 1.0), (&soc, 5.0), (&exp, 1.0)] {
        let sol = solve(p, &settings).unwrap();
        analytic = analytic.max(if sol.status == Status::Optimal { (sol.primal_objective - want).abs() } else { f64::INFINITY });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst_kkt: f64 = 0.0;
    for _ in 0..100 {
        let cones = vec![Cone::Zero(1), Cone::NonNeg(3), Cone::Soc(4), Cone::Psd(3), Cone::Psd(2)];
        let p = random_feasible(&mut rng, cones.clone(), 8);
        let sol = solve(&p, &settings).unwrap();
        if sol.status != Status::Optimal {
            worst_kkt = f64::INFINITY;
            continue;
        }
        let scale_p = 1.0 + p.b.amax().max(p.a_mul(&sol.x).amax()).max(sol.s.amax());
        let scale_d = 1.0 + p.c.amax().max(p.a_tr_mul(&sol.y).amax());
        let scale_g = 1.0 + sol.primal_objective.abs().max(sol.dual_objective.abs());
        let cone_err = distance_to_cone(&cones, sol.s.as_slice()).max(distance_to_dual_cone(&cones, sol.y.as_slice()));
        worst_kkt = worst_kkt
            .max(sol.primal_residual / scale_p)
            .max(sol.dual_residual / scale_d)
            .max((sol.primal_objective - sol.dual_objective).abs() / scale_g)
            .max(cone_err);
    }
    let pass = analytic <= 1e-5 && worst_kkt <= 1e-6;
    verdict(pass, format!("analytic error {analytic:.2e} (limit 1e-5), worst scaled KKT residual {worst_kkt:.2e} over 100 SDP+SOC problems (limit 1e-6)"))
}

fn c8(runs: &[(u64, AoResult)], seconds: f64) -> Verdict {
    let converged = runs.iter().filter(|(_, r)| r.converged).count();
    let worst_drop = runs.iter().map(|(_, r)| r.max_surrogate_drop()).fold(0.0, f64::max);
    let max_iter = runs.iter().map(|(_, r)| r.iterations).max().unwrap_or(0);
    let mean_iter = runs.iter().map(|(_, r)| r.iterations as f64).sum::<f64>() / runs.len() as f64;
    let pass = converged >= 19 && worst_drop <= ETA && seconds < 1800.0;
    verdict(
        pass,
        format!(
            "{converged}/{} seeds converged (|dobj| < 1e-4), iterations mean {mean_iter:.1} max {max_iter}, worst surrogate drop {worst_drop:.1e}, {seconds:.0} s",
            runs.len()
        ),
    )
}

fn gap_line(r: &SweepResult, a: Scheme, b: Scheme, value: f64) -> (bool, String) {
    match r.paired_gap((a, value), (b, value)) {
        Some(g) => (
            g.mean_diff > 0.0,
            format!(
                "{a} {:.4} vs {b} {:.4} bits/s/Hz, paired gap {:+.4} ({:+.1}%), {}/{} draws ahead",
                g.mean_a, g.mean_b, g.mean_diff, g.percent, g.wins, g.n_pairs
            ),
        ),
        None => (false, format!("{a} vs {b}: no completed pairs")),
    }
}

fn c9(hwi: &SweepResult) -> Verdict {
    let (pass, line) = gap_line(hwi, Scheme::RsmaStarRobust, Scheme::RsmaStarNonrobust, 0.01);
    verdict(pass, format!("mu = 0.01: {line}"))
}

fn c10(hwi: &SweepResult) -> Verdict {
    let (p1, l1) = gap_line(hwi, Scheme::RsmaStarRobust, Scheme::RsmaRisRobust, 0.01);
    let (p2, l2) = gap_line(hwi, Scheme::RsmaStarNonrobust, Scheme::RsmaRisNonrobust, 0.01);
    verdict(p1 && p2, format!("mu = 0.01: {l1}; {l2}"))
}

fn means(r: &SweepResult, scheme: Scheme) -> Vec<f64> {
    r.values.iter().map(|&v| r.cell(scheme, v).map_or(f64::NAN, |c| c.mean_rate())).collect()
}

fn fmt_means(m: &[f64]) -> String {
    m.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ")
}

fn c11(power: &SweepResult) -> Verdict {
    let m = means(power, Scheme::RsmaStarRobust);
    let monotone = m.windows(2).all(|w| w[1] >= w[0]);
    let low = (m[1] - m[0]) / 4.0;
    let high = (m[3] - m[2]) / 5.0;
    let complete = power.cells.iter().all(|c| c.n_fail() == 0);
    verdict(
        monotone && high < low && complete,
        format!(
            "{} means at P = 1, 5, 10, 15 W: [{}]; gain per watt {low:.4} over [1,5], {high:.4} over [10,15]",
            Scheme::RsmaStarRobust,
            fmt_means(&m)
        ),
    )
}

fn c12(hwi: &SweepResult) -> Verdict {
    let mut pass = hwi.cells.iter().all(|c| c.n_fail() == 0);
    let mut parts = Vec::new();
    for &s in &hwi.schemes {
        let m = means(hwi, s);
        let ok = m.windows(2).all(|w| w[1] <= w[0]);
        pass &= ok;
        parts.push(format!("{s} [{}]{}", fmt_means(&m), if ok { "" } else { " INCREASES" }));
    }
    let mut coincide: f64 = 0.0;
    for (a, b) in [(Scheme::RsmaStarRobust, Scheme::RsmaStarNonrobust), (Scheme::RsmaRisRobust, Scheme::RsmaRisNonrobust)] {
        for d in 0..hwi.n_channel_draws {
            let ra = hwi.cell(a, 0.0).and_then(|c| c.rate_of_draw(d));
            let rb = hwi.cell(b, 0.0).and_then(|c| c.rate_of_draw(d));
            coincide = coincide.max(match (ra, rb) {
                (Some(x), Some(y)) => (x - y).abs(),
                _ => f64::INFINITY,
            });
        }
    }
    pass &= coincide <= 1e-6;
    verdict(pass, format!("means at mu = 0, 0.01, 0.05, 0.1: {}; max |robust - non-robust| at mu = 0: {coincide:.1e}", parts.join("; ")))
}

fn sweep(axis: SweepAxis, values: Vec<f64>, schemes: Vec<Scheme>) -> SweepResult {
    let spec = SweepSpec { axis, values, schemes, n_channel_draws: DRAWS, base_config: ScenarioConfig::default() };
    run_sweep(&spec).expect("valid sweep")
}

fn main() {
    let only: Option<Vec<u32>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect());
    let wanted = |id: u32| only.as_ref().is_none_or(|o| o.contains(&id));
    let names = [
        "closed-form phase statistics",
        "effective-correlation oracle",
        "instantaneous/average consistency",
        "FP tightness",
        "lifting equivalence",
        "SCA safety and tangency",
        "solver self-test",
        "AO convergence",
        "robust vs non-robust",
        "STAR vs conventional RIS",
        "power saturation",
        "HWI degradation",
    ];
    let mut failed = 0;
    let mut report = |id: u32, seconds: f64, v: Verdict| {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {id:>2} {}: {} [{seconds:.1} s]", names[id as usize - 1], v.detail);
        if !v.pass {
            failed += 1;
        }
    };

    let quick: [(u32, fn() -> Verdict); 7] = [(1, c1), (2, c2), (3, c3), (4, c4), (5, c5), (6, c6), (7, c7)];
    for (id, f) in quick {
        if wanted(id) {
            let t = Instant::now();
            let v = f();
            report(id, t.elapsed().as_secs_f64(), v);
        }
    }

    if wanted(8) {
        let t = Instant::now();
        let cfg = ScenarioConfig::default();
        let runs: Vec<(u64, AoResult)> = (0..DRAWS as u64)
            .into_par_iter()
            .map(|d| {
                let c = ScenarioConfig { seed: cfg.seed + d, ..cfg.clone() };
                let (_, ch) = draw_channels(&c).unwrap();
                (c.seed, run_with(&c, &ch, &AoSettings::default()).unwrap())
            })
            .collect();
        let seconds = t.elapsed().as_secs_f64();
        report(8, seconds, c8(&runs, seconds));
    }

    if wanted(9) || wanted(10) || wanted(12) {
        let t = Instant::now();
        let hwi = sweep(SweepAxis::Hwi, vec![0.0, 0.01, 0.05, 0.1], Scheme::ALL.to_vec());
        let seconds = t.elapsed().as_secs_f64();
        println!("     hwi sweep: {} runs in {seconds:.0} s", hwi.cells.iter().map(|c| c.runs.len()).sum::<usize>());
        for (id, f) in [(9, c9 as fn(&SweepResult) -> Verdict), (10, c10), (12, c12)] {
            if wanted(id) {
                report(id, seconds, f(&hwi));
            }
        }
    }

    if wanted(11) {
        let t = Instant::now();
        let power = sweep(SweepAxis::Power, vec![1.0, 5.0, 10.0, 15.0], vec![Scheme::RsmaStarRobust]);
        report(11, t.elapsed().as_secs_f64(), c11(&power));
    }

    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
