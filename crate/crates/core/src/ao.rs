//! FP-AO: alternate closed-form auxiliary updates, the beamforming /
//! common-rate subproblem and the STAR-coefficient subproblem until the
//! sum rate stops moving.

use crate::channel::ChannelSet;
use crate::fp::{fp_objective, update_aux, FpAux};
use crate::hwi_stats::{EffectiveChannelStats, PhaseNoiseStats, StatsError};
use crate::rates::{clip_common_rate, common_rate_cap, objective_sum_rate, Precoder, RateError, StarCoefficients};
use crate::scenario::{rng_for, DesignMode, RisMode, ScenarioConfig, Stream};
use crate::subproblems::{
    build_beamforming_subproblem, build_lifted_matrices, build_phase_subproblem, recover_precoder, recover_star_coefficients,
    ScaState, SubproblemError,
};
use crate::{CMatrix, CVector};
use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;
use star_rsma_conic::{solve_warm, ConicSolution, Settings, Status, WarmStart};
use std::f64::consts::PI;
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum AoError {
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Subproblem(#[from] SubproblemError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub const SUBPROBLEM_ITERS: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct AoSettings {
    pub max_iter: usize,
    /// Allowed per-cycle drop of the surrogate (solver / extraction slack).
    pub eta: f64,
    pub solver: Settings,
    pub warm_start: bool,
}

impl Default for AoSettings {
    fn default() -> Self {
        let solver = Settings { tol: 1e-5, max_iter: SUBPROBLEM_ITERS, ..Settings::default() };
        Self { max_iter: 100, eta: 1e-5, solver, warm_start: true }
    }
}

/// The rate model the optimizer sees: the configured impairments for the
/// robust design, `mu_t = mu_r = 0` for the non-robust one.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignModel {
    pub config: ScenarioConfig,
    pub phase: PhaseNoiseStats,
}

impl DesignModel {
    pub fn for_config(config: &ScenarioConfig) -> Self {
        let mut design = config.clone();
        if config.design_mode == DesignMode::NonRobust {
            design.mu_t = 0.0;
            design.mu_r = 0.0;
        }
        Self { phase: PhaseNoiseStats::closed_form(config.n), config: design }
    }

    pub fn stats(&self, channels: &ChannelSet, star: &StarCoefficients) -> Result<EffectiveChannelStats, StatsError> {
        EffectiveChannelStats::compute(channels, star, &self.phase)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveInfo {
    pub status: Option<Status>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Smallest `lambda_1 / Tr` over the lifted blocks of this solve.
    pub rank1_quality: f64,
    pub accepted: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Sum rate under the design model, bits/s/Hz.
    pub objective_bits: f64,
    /// `f_R` at the new iterate with the auxiliaries used for its last
    /// block, nats.
    pub surrogate: f64,
    pub beamforming: SolveInfo,
    pub phase: SolveInfo,
}

#[derive(Debug, Clone)]
pub struct AoState {
    pub precoder: Precoder,
    pub star: StarCoefficients,
    pub aux: FpAux,
    pub sca: ScaState,
    pub objective_trace: Vec<TraceEntry>,
    warm_bf: Option<WarmStart>,
    warm_phase: Option<WarmStart>,
}

fn leading_direction(t: &CMatrix) -> CVector {
    let m = t.nrows();
    if t.norm() == 0.0 {
        return CVector::from_element(m, Complex64::new(1.0 / (m as f64).sqrt(), 0.0));
    }
    let eig = SymmetricEigen::new(t.clone());
    let k = eig.eigenvalues.imax();
    eig.eigenvectors.column(k).into_owned()
}

/// Random phases (equal split, or the pinned pattern in conventional mode),
/// eigen-matched beamformers with equal power per stream, `c = 0`.
pub fn initialize<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    channels: &ChannelSet,
    rng: &mut R,
    model: &DesignModel,
) -> Result<AoState, AoError> {
    let n = channels.n();
    let phase_t: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let phase_r: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let star = match config.ris_mode {
        RisMode::Star => StarCoefficients::equal_split(&phase_t, &phase_r),
        RisMode::Conventional => StarCoefficients::conventional(&phase_t, &phase_r),
    };
    let stats = model.stats(channels, &star)?;
    let k = channels.k();
    let m = channels.m();
    let amp = Complex64::new((config.p_max / (k + 1) as f64).sqrt(), 0.0);
    let mut precoder = Precoder::zeros(m, k);
    let mut sum = CMatrix::zeros(m, m);
    for (j, t) in stats.t_bar.iter().enumerate() {
        precoder.f_private.set_column(j, &(leading_direction(t) * amp));
        sum += t;
    }
    precoder.f_common = leading_direction(&sum) * amp;
    let sca = ScaState::from_precoder(&precoder, model.config.mu_t, model.config.mu_r);
    let aux = update_aux(&stats, &precoder, &model.config)?;
    Ok(AoState { precoder, star, aux, sca, objective_trace: Vec::new(), warm_bf: None, warm_phase: None })
}

fn solve_info(sol: Option<&ConicSolution>, quality: f64, accepted: bool, started: Instant) -> SolveInfo {
    SolveInfo {
        status: sol.map(|s| s.status),
        iterations: sol.map_or(0, |s| s.iterations),
        primal_residual: sol.map_or(f64::NAN, |s| s.primal_residual),
        dual_residual: sol.map_or(f64::NAN, |s| s.dual_residual),
        rank1_quality: quality,
        accepted,
        seconds: started.elapsed().as_secs_f64(),
    }
}

/// Subproblem solves are capped; an iterate that stopped at the cap is
/// still a valid candidate because every block is accepted only if it
/// raises the surrogate.
fn candidate_usable(sol: &ConicSolution) -> bool {
    matches!(sol.status, Status::Optimal | Status::Inaccurate | Status::IterationLimit) && sol.x.iter().all(|v| v.is_finite())
}

fn warm_for(sol: &ConicSolution, settings: &AoSettings) -> Option<WarmStart> {
    (settings.warm_start && candidate_usable(sol)).then(|| WarmStart::from(sol))
}

/// Clips `c` to the common-rate cap of `precoder` under the design model.
fn clip_to_cap(stats: &EffectiveChannelStats, precoder: &mut Precoder, config: &ScenarioConfig) -> Result<(), RateError> {
    let cap = common_rate_cap(stats, precoder, config)?;
    clip_common_rate(&mut precoder.c_alloc, cap);
    Ok(())
}

/// One AO cycle. Each block's result is kept only if it does not lower the
/// surrogate at the freshly updated auxiliaries; since the surrogate is a
/// tight lower bound on the sum rate, both traces are non-decreasing.
pub fn step(state: &AoState, channels: &ChannelSet, model: &DesignModel, settings: &AoSettings) -> Result<AoState, AoError> {
    let cfg = &model.config;
    let mut next = state.clone();
    let iteration = state.objective_trace.len() + 1;

    // beamformers and common-rate split
    let started = Instant::now();
    let stats = model.stats(channels, &next.star)?;
    next.aux = update_aux(&stats, &next.precoder, cfg)?;
    let before = fp_objective(&stats, &next.precoder, &next.aux, cfg);
    next.sca = ScaState::from_precoder(&next.precoder, cfg.mu_t, cfg.mu_r);
    let bp = build_beamforming_subproblem(&stats, &next.aux, &next.sca, cfg)?;
    let warm = next.warm_bf.as_ref().filter(|w| w.x.len() == bp.problem.num_vars());
    let sol = solve_warm(&bp.problem, &settings.solver, warm).map_err(SubproblemError::from)?;
    let mut quality = f64::NAN;
    let mut accepted = false;
    if candidate_usable(&sol) {
        let rec = recover_precoder(&bp, &sol);
        quality = rec.rank1_quality.iter().copied().fold(1.0, f64::min);
        let mut candidate = rec.precoder;
        clip_to_cap(&stats, &mut candidate, cfg)?;
        if fp_objective(&stats, &candidate, &next.aux, cfg) >= before {
            next.precoder = candidate;
            accepted = true;
        }
        next.warm_bf = warm_for(&sol, settings);
    }
    let bf_info = solve_info(Some(&sol), quality, accepted, started);

    // STAR coefficients with c fixed
    let started = Instant::now();
    next.aux = update_aux(&stats, &next.precoder, cfg)?;
    let before = fp_objective(&stats, &next.precoder, &next.aux, cfg);
    let mut phase_info = solve_info(None, f64::NAN, false, started);
    if channels.n() > 0 {
        let lifted = build_lifted_matrices(channels, &next.precoder, &model.phase, cfg)?;
        let pp = build_phase_subproblem(&lifted, &next.aux, next.precoder.c_alloc.sum(), channels.k0, cfg)?;
        let warm = next.warm_phase.as_ref().filter(|w| w.x.len() == pp.problem.num_vars());
        let sol = solve_warm(&pp.problem, &settings.solver, warm).map_err(SubproblemError::from)?;
        let mut quality = f64::NAN;
        let mut accepted = false;
        if candidate_usable(&sol) {
            if let Ok(rec) = recover_star_coefficients(&pp, &sol) {
                quality = rec.rank1_quality[0].min(rec.rank1_quality[1]);
                let new_stats = model.stats(channels, &rec.star)?;
                let mut candidate = next.precoder.clone();
                clip_to_cap(&new_stats, &mut candidate, cfg)?;
                if fp_objective(&new_stats, &candidate, &next.aux, cfg) >= before {
                    next.star = rec.star;
                    next.precoder = candidate;
                    accepted = true;
                }
            }
            next.warm_phase = warm_for(&sol, settings);
        }
        phase_info = solve_info(Some(&sol), quality, accepted, started);
    }

    let stats = model.stats(channels, &next.star)?;
    let objective_bits = objective_sum_rate(&stats, &next.precoder, cfg)?;
    let surrogate = fp_objective(&stats, &next.precoder, &next.aux, cfg);
    next.objective_trace.push(TraceEntry { iteration, objective_bits, surrogate, beamforming: bf_info, phase: phase_info });
    Ok(next)
}

#[derive(Debug, Clone)]
pub struct AoResult {
    pub precoder: Precoder,
    pub star: StarCoefficients,
    /// Sum rate of the returned design under the configured impairments.
    pub objective_bits: f64,
    /// Sum rate of the returned design under the model it was optimized for.
    pub design_objective_bits: f64,
    /// Design-model sum rate of the initial point.
    pub initial_objective_bits: f64,
    pub trace: Vec<TraceEntry>,
    pub iterations: usize,
    pub converged: bool,
    pub seconds: f64,
}

impl AoResult {
    /// Largest drop of the recorded surrogate between consecutive cycles
    /// (zero for a monotone trace).
    pub fn max_surrogate_drop(&self) -> f64 {
        self.trace.windows(2).map(|w| w[0].surrogate - w[1].surrogate).fold(0.0, f64::max)
    }
}

/// Runs FP-AO with the design variant selected by `config.design_mode` and
/// `config.ris_mode`.
pub fn run(config: &ScenarioConfig, channels: &ChannelSet) -> Result<AoResult, AoError> {
    run_with(config, channels, &AoSettings::default())
}

pub fn run_with(config: &ScenarioConfig, channels: &ChannelSet, settings: &AoSettings) -> Result<AoResult, AoError> {
    run_with_model(config, channels, &DesignModel::for_config(config), settings)
}

/// Optimizes under `model` and reports the result under `config`'s
/// impairments with `model`'s phase statistics.
pub fn run_with_model(
    config: &ScenarioConfig,
    channels: &ChannelSet,
    model: &DesignModel,
    settings: &AoSettings,
) -> Result<AoResult, AoError> {
    if config.ris_mode == RisMode::Conventional && !channels.n().is_multiple_of(2) {
        return Err(AoError::Config("conventional RIS mode needs an even element count".into()));
    }
    if channels.k() != config.k || channels.m() != config.m || channels.n() != config.n || channels.k0 != config.k0 {
        return Err(AoError::Config("channel dimensions differ from the configuration".into()));
    }
    let started = Instant::now();
    let mut rng = rng_for(config.seed, Stream::Init);
    let mut state = initialize(config, channels, &mut rng, model)?;
    let initial_stats = model.stats(channels, &state.star)?;
    let initial = objective_sum_rate(&initial_stats, &state.precoder, &model.config)?;

    let mut best = (initial, state.precoder.clone(), state.star.clone());
    let mut previous = initial;
    let mut converged = false;
    for _ in 0..settings.max_iter {
        state = step(&state, channels, model, settings)?;
        let obj = state.objective_trace.last().map_or(previous, |e| e.objective_bits);
        if obj > best.0 {
            best = (obj, state.precoder.clone(), state.star.clone());
        }
        if (obj - previous).abs() < config.conv_eps {
            converged = true;
            break;
        }
        previous = obj;
    }

    let (design_objective_bits, mut precoder, star) = best;
    let truth = DesignModel { config: config.clone(), phase: model.phase.clone() };
    let true_stats = truth.stats(channels, &star)?;
    clip_to_cap(&true_stats, &mut precoder, config)?;
    let objective_bits = objective_sum_rate(&true_stats, &precoder, config)?;
    Ok(AoResult {
        precoder,
        star,
        objective_bits,
        design_objective_bits,
        initial_objective_bits: initial,
        iterations: state.objective_trace.len(),
        trace: state.objective_trace,
        converged,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Optimizes as if `mu_t = mu_r = 0`, then reports the design's sum rate
/// under the configured impairments.
pub fn run_non_robust(config: &ScenarioConfig, channels: &ChannelSet) -> Result<AoResult, AoError> {
    let cfg = ScenarioConfig { design_mode: DesignMode::NonRobust, ..config.clone() };
    run(&cfg, channels)
}

pub fn run_conventional_ris(config: &ScenarioConfig, channels: &ChannelSet) -> Result<AoResult, AoError> {
    let cfg = ScenarioConfig { ris_mode: RisMode::Conventional, ..config.clone() };
    run(&cfg, channels)
}

pub const TRACE_HEADER: [&str; 13] = [
    "iteration",
    "objective_bits",
    "surrogate_nats",
    "bf_status",
    "bf_iterations",
    "bf_primal_residual",
    "bf_rank1_quality",
    "bf_accepted",
    "phase_status",
    "phase_iterations",
    "phase_primal_residual",
    "phase_rank1_quality",
    "phase_accepted",
];

fn status_name(s: Option<Status>) -> String {
    s.map_or_else(|| "skipped".to_string(), |s| format!("{s:?}").to_lowercase())
}

/// Per-iteration run log: objective, surrogate, solver status, residuals
/// and rank-1 quality of both blocks.
pub fn write_trace_csv<W: std::io::Write>(trace: &[TraceEntry], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for e in trace {
        w.write_record([
            e.iteration.to_string(),
            format!("{:.11e}", e.objective_bits),
            format!("{:.11e}", e.surrogate),
            status_name(e.beamforming.status),
            e.beamforming.iterations.to_string(),
            format!("{:.3e}", e.beamforming.primal_residual),
            format!("{:.6}", e.beamforming.rank1_quality),
            e.beamforming.accepted.to_string(),
            status_name(e.phase.status),
            e.phase.iterations.to_string(),
            format!("{:.3e}", e.phase.primal_residual),
            format!("{:.6}", e.phase.rank1_quality),
            e.phase.accepted.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
