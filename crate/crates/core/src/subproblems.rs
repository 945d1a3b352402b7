//! The two convex subproblems of one AO cycle, lowered onto the conic
//! solver: beamforming + common-rate split (fixed STAR coefficients) and
//! STAR coefficients (fixed precoder and `c`).
//!
//! Both are posed in normalized units so the solver sees O(1) data:
//! powers are divided by `p_max`, channel correlations multiplied by
//! `p_max / s` with `s = (1 + mu_r) sigma^2`, and `b` multiplied by
//! `sqrt(s)`. The changes of variables are exact.

use crate::channel::ChannelSet;
use crate::fp::FpAux;
use crate::hwi_stats::{EffectiveChannelStats, PhaseNoiseStats};
use crate::rates::{distortion_covariances, trace_product, DistortionCovariances, Precoder, StarCoefficients};
use crate::scenario::{RisMode, ScenarioConfig};
use crate::{CMatrix, CVector};
use nalgebra::DVector;
use num_complex::Complex64;
use star_rsma_conic::{extract_rank1, Cone, ConicError, ConicProblem, ConicSolution, HermitianBlock, ProblemBuilder};
use std::f64::consts::LN_2;

#[derive(Debug, thiserror::Error)]
pub enum SubproblemError {
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("degenerate solution: {0}")]
    Degenerate(String),
}

fn real(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// Expansion point of the common-rate bound: `F_a^n`, `F_b^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaState {
    pub f_a_prev: CMatrix,
    pub f_b_prev: CMatrix,
}

impl ScaState {
    pub fn from_precoder(precoder: &Precoder, mu_t: f64, mu_r: f64) -> Self {
        let d = distortion_covariances(precoder, mu_t, mu_r);
        Self { f_a_prev: d.f_a, f_b_prev: d.f_b }
    }

    fn total(&self) -> CMatrix {
        &self.f_a_prev + &self.f_b_prev
    }
}

/// Concave lower bound on user k's common rate, in bits:
/// `log2(g Tr(T(F'_a+F'_b)) + g Tr(T F_c) + 1) - log2(1 + e) - (g Tr(T(F'_a+F'_b)) - e) / (ln2 (1 + e))`
/// with `g = 1 / ((1+mu_r) sigma^2)` and `e = g Tr(T(F_a^n + F_b^n))`.
pub fn sca_common_rate_bound(
    t_bar: &CMatrix,
    sca: &ScaState,
    candidate: &DistortionCovariances,
    f_c: &CMatrix,
    config: &ScenarioConfig,
) -> f64 {
    let gamma = 1.0 / config.noise_floor();
    let e = gamma * trace_product(t_bar, &sca.total());
    let x = gamma * trace_product(t_bar, &candidate.total());
    let w = gamma * trace_product(t_bar, f_c);
    ((x + w + 1.0).ln() - e.ln_1p() - (x - e) / (1.0 + e)) / LN_2
}

/// `C` with `Tr(T X'_tot) = Tr(C_c X_c) + sum_j Tr(C_p X_j)`, where `X'_tot` is
/// the distortion-inflated covariance built from lifted beamformers.
fn distorted_coeffs(t: &CMatrix, mu_t: f64, mu_r: f64) -> (CMatrix, CMatrix) {
    let dt = CMatrix::from_diagonal(&t.diagonal());
    let c_common = t * real(mu_r) + &dt * real((1.0 + mu_r) * mu_t);
    let c_private = (t + &dt * real(mu_t)) * real(1.0 + mu_r);
    (c_common, c_private)
}

fn add_coeffs(row: &mut [f64], coeffs: &[(usize, f64)], scale: f64) {
    for &(i, w) in coeffs {
        row[i] += scale * w;
    }
}

fn psd_rows(builder: &mut ProblemBuilder, block: &HermitianBlock) {
    let mut rows = vec![(Vec::new(), 0.0); block.psd_rows()];
    for (r, var, w) in block.realified_svec_map() {
        rows[r].0.push((var, -w));
    }
    builder.push_cone_sparse(Cone::Psd(2 * block.n), rows);
}

/// `t^2 <= w` as `((w+1)/2, t, (w-1)/2)` in the second-order cone, where
/// `w = w_row . x`.
fn soc_epigraph(builder: &mut ProblemBuilder, t_var: usize, w_row: &[f64]) {
    let mut r0 = builder.zero_row();
    let mut r1 = builder.zero_row();
    let mut r2 = builder.zero_row();
    for (i, &w) in w_row.iter().enumerate() {
        r0[i] = -0.5 * w;
        r2[i] = -0.5 * w;
    }
    r1[t_var] = -1.0;
    builder.push_cone(Cone::Soc(3), vec![(r0, 0.5), (r1, 0.0), (r2, -0.5)]);
}

/// P2 in normalized variables `X = F / p_max`.
#[derive(Debug, Clone)]
pub struct BeamformingProblem {
    pub problem: ConicProblem,
    /// K private blocks, then the common block.
    pub blocks: Vec<HermitianBlock>,
    pub c_offset: usize,
    pub t_offset: usize,
    pub p_max: f64,
}

pub fn build_beamforming_subproblem(
    stats: &EffectiveChannelStats,
    aux: &FpAux,
    sca: &ScaState,
    config: &ScenarioConfig,
) -> Result<BeamformingProblem, SubproblemError> {
    let k_users = stats.k();
    if aux.a.len() != k_users || aux.b.len() != k_users {
        return Err(SubproblemError::Dimension("aux length differs from user count".into()));
    }
    let m = stats.t_bar.first().map_or(0, |t| t.nrows());
    let s = config.noise_floor();
    let p = config.p_max;
    let blocks: Vec<HermitianBlock> = (0..=k_users).map(|j| HermitianBlock::new(j * m * m, m)).collect();
    let c_offset = (k_users + 1) * m * m;
    let t_offset = c_offset + k_users;
    let n_vars = t_offset + k_users;
    let common = blocks[k_users];

    let mut builder = ProblemBuilder::new(n_vars);
    let t_hat: Vec<CMatrix> = stats.t_bar.iter().map(|t| t * real(p / s)).collect();
    let b_hat: Vec<f64> = aux.b.iter().map(|b| b * s.sqrt()).collect();

    // Tr(T_hat X'_tot) rows per user
    let tot_rows: Vec<Vec<f64>> = t_hat
        .iter()
        .map(|t| {
            let (cc, cp) = distorted_coeffs(t, config.mu_t, config.mu_r);
            let mut row = vec![0.0; n_vars];
            let cp = blocks[0].trace_coeffs(&cp);
            for blk in &blocks[..k_users] {
                let shift = blk.offset;
                add_coeffs(&mut row, &cp.iter().map(|&(i, w)| (i + shift, w)).collect::<Vec<_>>(), 1.0);
            }
            add_coeffs(&mut row, &common.trace_coeffs(&cc), 1.0);
            row
        })
        .collect();

    {
        let obj = builder.objective_mut();
        for k in 0..k_users {
            obj[t_offset + k] -= 2.0 * b_hat[k];
            obj[c_offset + k] -= 1.0;
            for (o, w) in obj.iter_mut().zip(&tot_rows[k]) {
                *o += b_hat[k] * b_hat[k] * w;
            }
        }
    }

    // power budget and c >= 0
    let mut rows = Vec::with_capacity(1 + k_users);
    let mut power = builder.zero_row();
    for blk in &blocks {
        for i in 0..m {
            power[blk.diag_index(i)] = 1.0;
        }
    }
    rows.push((power, 1.0));
    for k in 0..k_users {
        let mut r = builder.zero_row();
        r[c_offset + k] = -1.0;
        rows.push((r, 0.0));
    }
    builder.push_cone(Cone::NonNeg(1 + k_users), rows);

    // t_k^2 <= (1 + a_k) Tr(T_hat_k X_k)
    for k in 0..k_users {
        let mut w = vec![0.0; n_vars];
        add_coeffs(&mut w, &blocks[k].trace_coeffs(&t_hat[k]), 1.0 + aux.a[k]);
        soc_epigraph(&mut builder, t_offset + k, &w);
    }

    // sum c + ln(1+e) + (Tr(T_hat X'_tot) - e)/(1+e) <= ln(Tr(T_hat X'_tot) + Tr(T_hat X_c) + 1)
    let sca_total = sca.total() * real(1.0 / s);
    for k in 0..k_users {
        let e = trace_product(&stats.t_bar[k], &sca_total);
        let mut u = builder.zero_row();
        for j in 0..k_users {
            u[c_offset + j] = -1.0;
        }
        for (ui, w) in u.iter_mut().zip(&tot_rows[k]) {
            *ui -= w / (1.0 + e);
        }
        let mut l = builder.zero_row();
        for (li, w) in l.iter_mut().zip(&tot_rows[k]) {
            *li = -w;
        }
        add_coeffs(&mut l, &common.trace_coeffs(&t_hat[k]), -1.0);
        builder.push_cone(Cone::Exp, vec![(u, e.ln_1p() - e / (1.0 + e)), (builder.zero_row(), 1.0), (l, 1.0)]);
    }

    for blk in &blocks {
        psd_rows(&mut builder, blk);
    }
    Ok(BeamformingProblem { problem: builder.build()?, blocks, c_offset, t_offset, p_max: p })
}

#[derive(Debug, Clone)]
pub struct RecoveredPrecoder {
    pub precoder: Precoder,
    /// `lambda_1 / Tr` per lifted block (K private, then common); 1 for
    /// zero blocks.
    pub rank1_quality: Vec<f64>,
    /// Common-rate shares straight from the solver, nats.
    pub c_nats: Vec<f64>,
}

fn rank1_or_zero(x: &CMatrix) -> (CVector, f64) {
    match extract_rank1(x) {
        Ok(r) => (r.vector, r.quality),
        Err(_) => (CVector::zeros(x.nrows()), 1.0),
    }
}

/// Leading-eigenvector beamformers, rescaled into the power budget; `c`
/// converted to bits and clamped at zero. Clipping `c` to the new cap is
/// left to the caller, which owns the rate model.
pub fn recover_precoder(bp: &BeamformingProblem, solution: &ConicSolution) -> RecoveredPrecoder {
    let x = solution.x.as_slice();
    let k_users = bp.blocks.len() - 1;
    let m = bp.blocks[0].n;
    let mut precoder = Precoder::zeros(m, k_users);
    let mut quality = Vec::with_capacity(k_users + 1);
    for (j, blk) in bp.blocks.iter().enumerate() {
        let lifted = blk.extract(x) * real(bp.p_max);
        let (v, q) = rank1_or_zero(&lifted);
        quality.push(q);
        if j < k_users {
            precoder.f_private.set_column(j, &v);
        } else {
            precoder.f_common = v;
        }
    }
    let power = precoder.power();
    if power > bp.p_max {
        let scale = real((bp.p_max / power).sqrt());
        precoder.f_private *= scale;
        precoder.f_common *= scale;
    }
    let c_nats: Vec<f64> = (0..k_users).map(|k| x[bp.c_offset + k].max(0.0)).collect();
    precoder.c_alloc = DVector::from_iterator(k_users, c_nats.iter().map(|c| c / LN_2));
    RecoveredPrecoder { precoder, rank1_quality: quality, c_nats }
}

/// Lifted `(N+1) x (N+1)` matrices with `Tr(Q_bar v_bar v_bar^H) = Tr(T_k f_k f_k^H)`,
/// likewise `S_bar` for `F_a + F_b` and `W_bar` for `f_c f_c^H`, where
/// `v_bar = [v; 1]` and `v` is the user's side of the STAR coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedPhaseData {
    pub q_bar: Vec<CMatrix>,
    pub s_bar: Vec<CMatrix>,
    pub w_bar: Vec<CMatrix>,
}

/// `[[ (diag(g) S diag(g^*)) .* (G X G^H)^T , m diag(h^H X G^H) g ], [ . , h^H X h ]]`.
pub fn lift(channels: &ChannelSet, k: usize, x: &CMatrix, stats: &PhaseNoiseStats) -> CMatrix {
    let n = channels.n();
    let g = &channels.g[k];
    let h = &channels.h[k];
    let big_g = &channels.bs_ris;
    let gxg = big_g * x * big_g.adjoint();
    let hxg = h.adjoint() * x * big_g.adjoint();
    let mut out = CMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = g[i] * g[j].conj() * stats.second_moment[(i, j)] * gxg[(j, i)];
        }
        let q = hxg[(0, i)] * g[i] * stats.first_moment_scale;
        out[(i, n)] = q;
        out[(n, i)] = q.conj();
    }
    out[(n, n)] = real((h.adjoint() * x * h)[(0, 0)].re);
    out
}

pub fn build_lifted_matrices(
    channels: &ChannelSet,
    precoder: &Precoder,
    stats: &PhaseNoiseStats,
    config: &ScenarioConfig,
) -> Result<LiftedPhaseData, SubproblemError> {
    if stats.n() != channels.n() || precoder.k() != channels.k() || precoder.m() != channels.m() {
        return Err(SubproblemError::Dimension("precoder, channels and phase statistics disagree".into()));
    }
    let dist = distortion_covariances(precoder, config.mu_t, config.mu_r).total();
    let fc = &precoder.f_common * precoder.f_common.adjoint();
    let mut out = LiftedPhaseData { q_bar: Vec::new(), s_bar: Vec::new(), w_bar: Vec::new() };
    for k in 0..channels.k() {
        let fk = precoder.private(k);
        out.q_bar.push(lift(channels, k, &(&fk * fk.adjoint()), stats));
        out.s_bar.push(lift(channels, k, &dist, stats));
        out.w_bar.push(lift(channels, k, &fc, stats));
    }
    Ok(out)
}

/// P3 over the two lifted blocks `V_t`, `V_r`.
#[derive(Debug, Clone)]
pub struct PhaseProblem {
    pub problem: ConicProblem,
    pub block_t: HermitianBlock,
    pub block_r: HermitianBlock,
    pub t_offset: usize,
    pub mode: RisMode,
}

/// Conventional mode pins element `n` to transmit-only when `n < N/2`.
pub fn transmit_pinned(n: usize, n_elements: usize) -> bool {
    n < n_elements / 2
}

pub fn build_phase_subproblem(
    lifted: &LiftedPhaseData,
    aux: &FpAux,
    c_fixed_bits: f64,
    k0: usize,
    config: &ScenarioConfig,
) -> Result<PhaseProblem, SubproblemError> {
    let k_users = lifted.q_bar.len();
    let side = lifted.q_bar.first().map_or(1, |q| q.nrows());
    let n = side - 1;
    let s = config.noise_floor();
    let block_t = HermitianBlock::new(0, side);
    let block_r = HermitianBlock::new(side * side, side);
    let t_offset = 2 * side * side;
    let n_vars = t_offset + k_users;
    let block_of = |k: usize| if k < k0 { block_t } else { block_r };
    let mut builder = ProblemBuilder::new(n_vars);

    let scaled = |m: &CMatrix| m * real(1.0 / s);
    {
        let obj = builder.objective_mut();
        for k in 0..k_users {
            let b_hat = aux.b[k] * s.sqrt();
            obj[t_offset + k] -= 2.0 * b_hat;
            for (i, w) in block_of(k).trace_coeffs(&scaled(&lifted.s_bar[k])) {
                obj[i] += b_hat * b_hat * w;
            }
        }
    }

    let mut zero_rows = Vec::new();
    match config.ris_mode {
        RisMode::Star => {
            for e in 0..n {
                let mut r = builder.zero_row();
                r[block_t.diag_index(e)] = 1.0;
                r[block_r.diag_index(e)] = 1.0;
                zero_rows.push((r, 1.0));
            }
        }
        RisMode::Conventional => {
            for e in 0..n {
                let pin = if transmit_pinned(e, n) { 1.0 } else { 0.0 };
                let mut r = builder.zero_row();
                r[block_t.diag_index(e)] = 1.0;
                zero_rows.push((r, pin));
                let mut r = builder.zero_row();
                r[block_r.diag_index(e)] = 1.0;
                zero_rows.push((r, 1.0 - pin));
            }
        }
    }
    for blk in [block_t, block_r] {
        let mut r = builder.zero_row();
        r[blk.diag_index(n)] = 1.0;
        zero_rows.push((r, 1.0));
    }
    builder.push_cone(Cone::Zero(zero_rows.len()), zero_rows);

    // (Tr(S V) + 1) e^C <= Tr(S V) + Tr(W V) + 1, C = sum c in nats
    let growth = (c_fixed_bits.max(0.0) * LN_2).exp();
    let mut rows = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let blk = block_of(k);
        let mut r = builder.zero_row();
        add_coeffs(&mut r, &blk.trace_coeffs(&scaled(&lifted.s_bar[k])), growth - 1.0);
        add_coeffs(&mut r, &blk.trace_coeffs(&scaled(&lifted.w_bar[k])), -1.0);
        rows.push((r, 1.0 - growth));
    }
    builder.push_cone(Cone::NonNeg(k_users), rows);

    for k in 0..k_users {
        let mut w = vec![0.0; n_vars];
        add_coeffs(&mut w, &block_of(k).trace_coeffs(&scaled(&lifted.q_bar[k])), 1.0 + aux.a[k]);
        soc_epigraph(&mut builder, t_offset + k, &w);
    }

    psd_rows(&mut builder, &block_t);
    psd_rows(&mut builder, &block_r);
    Ok(PhaseProblem { problem: builder.build()?, block_t, block_r, t_offset, mode: config.ris_mode })
}

/// Homogenized coefficient vector from a lifted block: leading eigenvector
/// divided by its last entry.
fn dehomogenize(v_bar: &CMatrix) -> Result<(CVector, f64), SubproblemError> {
    let r = extract_rank1(v_bar)?;
    let n = v_bar.nrows() - 1;
    let last = r.vector[n];
    if last.norm() < 1e-9 {
        return Err(SubproblemError::Degenerate("homogenizing entry vanished".into()));
    }
    Ok((r.vector.rows(0, n).map(|z| z / last), r.quality))
}

#[derive(Debug, Clone)]
pub struct RecoveredStar {
    pub star: StarCoefficients,
    pub rank1_quality: [f64; 2],
}

/// Per-element renormalization onto `|v_t|^2 + |v_r|^2 = 1` (and onto the
/// pinned pattern in conventional mode).
pub fn project_energy_split(v_t: &CVector, v_r: &CVector, mode: RisMode) -> StarCoefficients {
    let n = v_t.len();
    let phase = |z: Complex64| if z.norm() > 0.0 { z / z.norm() } else { real(1.0) };
    let mut out = StarCoefficients { v_t: CVector::zeros(n), v_r: CVector::zeros(n) };
    for e in 0..n {
        let (t, r) = (v_t[e], v_r[e]);
        match mode {
            RisMode::Star => {
                let norm = (t.norm_sqr() + r.norm_sqr()).sqrt();
                if norm > 1e-12 {
                    out.v_t[e] = t / norm;
                    out.v_r[e] = r / norm;
                } else {
                    out.v_t[e] = real(std::f64::consts::FRAC_1_SQRT_2);
                    out.v_r[e] = real(std::f64::consts::FRAC_1_SQRT_2);
                }
            }
            RisMode::Conventional => {
                if transmit_pinned(e, n) {
                    out.v_t[e] = phase(t);
                } else {
                    out.v_r[e] = phase(r);
                }
            }
        }
    }
    out
}

pub fn recover_star_coefficients(pp: &PhaseProblem, solution: &ConicSolution) -> Result<RecoveredStar, SubproblemError> {
    let x = solution.x.as_slice();
    let (v_t, q_t) = dehomogenize(&pp.block_t.extract(x))?;
    let (v_r, q_r) = dehomogenize(&pp.block_r.extract(x))?;
    Ok(RecoveredStar { star: project_energy_split(&v_t, &v_r, pp.mode), rank1_quality: [q_t, q_r] })
}

/// Warm start for P3 from the current coefficients (exact rank-1 lifting).
pub fn lifted_point(pp: &PhaseProblem, star: &StarCoefficients) -> DVector<f64> {
    let mut x = DVector::zeros(pp.problem.num_vars());
    for (blk, v) in [(pp.block_t, &star.v_t), (pp.block_r, &star.v_r)] {
        let n = v.len();
        let mut v_bar = CVector::zeros(n + 1);
        v_bar.rows_mut(0, n).copy_from(v);
        v_bar[n] = real(1.0);
        blk.store(&(&v_bar * v_bar.adjoint()), x.as_mut_slice());
    }
    x
}
