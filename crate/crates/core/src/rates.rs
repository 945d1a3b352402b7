//! SINR and rate formulas: per phase-noise realization and HWI-averaged,
//! plus distortion covariances and the common-rate cap.

use crate::hwi_stats::EffectiveChannelStats;
use crate::scenario::ScenarioConfig;
use crate::{CMatrix, CVector};
use nalgebra::DVector;
use num_complex::Complex64;
use std::f64::consts::LN_2;

#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    /// Private beamformers as columns, M x K.
    pub f_private: CMatrix,
    pub f_common: CVector,
    /// Common-rate shares, bits/s/Hz.
    pub c_alloc: DVector<f64>,
}

impl Precoder {
    pub fn zeros(m: usize, k: usize) -> Self {
        Self { f_private: CMatrix::zeros(m, k), f_common: CVector::zeros(m), c_alloc: DVector::zeros(k) }
    }

    pub fn k(&self) -> usize {
        self.f_private.ncols()
    }

    pub fn m(&self) -> usize {
        self.f_private.nrows()
    }

    pub fn power(&self) -> f64 {
        self.f_private.norm_squared() + self.f_common.norm_squared()
    }

    pub fn private(&self, k: usize) -> CVector {
        self.f_private.column(k).into_owned()
    }
}

/// Per-element transmit / reflect coefficients, `|v_t|^2 + |v_r|^2 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StarCoefficients {
    pub v_t: CVector,
    pub v_r: CVector,
}

impl StarCoefficients {
    pub fn n(&self) -> usize {
        self.v_t.len()
    }

    pub fn empty() -> Self {
        Self { v_t: CVector::zeros(0), v_r: CVector::zeros(0) }
    }

    /// Equal energy split with the given phases on both sides.
    pub fn equal_split(phase_t: &[f64], phase_r: &[f64]) -> Self {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            v_t: CVector::from_iterator(phase_t.len(), phase_t.iter().map(|&p| Complex64::from_polar(a, p))),
            v_r: CVector::from_iterator(phase_r.len(), phase_r.iter().map(|&p| Complex64::from_polar(a, p))),
        }
    }

    /// Conventional-RIS pattern: the first `N/2` elements transmit only, the
    /// rest reflect only.
    pub fn conventional(phase_t: &[f64], phase_r: &[f64]) -> Self {
        let n = phase_t.len();
        let half = n / 2;
        let amp_t = |i: usize| if i < half { 1.0 } else { 0.0 };
        Self {
            v_t: CVector::from_fn(n, |i, _| Complex64::from_polar(amp_t(i), phase_t[i])),
            v_r: CVector::from_fn(n, |i, _| Complex64::from_polar(1.0 - amp_t(i), phase_r[i])),
        }
    }

    pub fn side(&self, transmit: bool) -> &CVector {
        if transmit {
            &self.v_t
        } else {
            &self.v_r
        }
    }

    /// Largest violation of the energy-splitting equality.
    pub fn energy_split_error(&self) -> f64 {
        self.v_t
            .iter()
            .zip(self.v_r.iter())
            .map(|(t, r)| (t.norm_sqr() + r.norm_sqr() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistortionCovariances {
    pub f_a: CMatrix,
    pub f_b: CMatrix,
}

impl DistortionCovariances {
    pub fn total(&self) -> CMatrix {
        &self.f_a + &self.f_b
    }
}

fn diag_part(x: &CMatrix) -> CMatrix {
    CMatrix::from_diagonal(&x.diagonal())
}

/// `F_a = mu_r f_c f_c^H + (1+mu_r) mu_t diag(f_c f_c^H)`,
/// `F_b = (1+mu_r)(F F^H + mu_t diag(F F^H))`.
pub fn distortion_covariances(precoder: &Precoder, mu_t: f64, mu_r: f64) -> DistortionCovariances {
    let fc = &precoder.f_common * precoder.f_common.adjoint();
    let ff = &precoder.f_private * precoder.f_private.adjoint();
    distortion_from_lifted(&fc, &ff, mu_t, mu_r)
}

/// Same maps applied to lifted (possibly higher-rank) covariances
/// `F_c ~ f_c f_c^H` and `sum_k F_k ~ F F^H`.
pub fn distortion_from_lifted(fc: &CMatrix, ff: &CMatrix, mu_t: f64, mu_r: f64) -> DistortionCovariances {
    let c = |v: f64| Complex64::new(v, 0.0);
    let f_a = fc * c(mu_r) + diag_part(fc) * c((1.0 + mu_r) * mu_t);
    let f_b = (ff + diag_part(ff) * c(mu_t)) * c(1.0 + mu_r);
    DistortionCovariances { f_a, f_b }
}

/// `Tr(A B)` for Hermitian arguments, real part.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

/// `x^H A x`, real part.
pub fn quad_form(a: &CMatrix, x: &CVector) -> f64 {
    x.dotc(&(a * x)).re
}

/// Exact SINRs for one realization of the total channel `t_k`.
pub fn instantaneous_sinr(t: &CVector, precoder: &Precoder, mu_t: f64, mu_r: f64, sigma2: f64, k: usize) -> (f64, f64) {
    let proj = |f: &CVector| t.dotc(f).norm_sqr();
    let gains: Vec<f64> = (0..precoder.k()).map(|j| proj(&precoder.private(j))).collect();
    let all_private: f64 = gains.iter().sum();
    let common = proj(&precoder.f_common);
    let tx_cov = &precoder.f_private * precoder.f_private.adjoint() + &precoder.f_common * precoder.f_common.adjoint();
    let tx_distortion: f64 = (0..t.len()).map(|i| t[i].norm_sqr() * tx_cov[(i, i)].re).sum();
    let shared = mu_r * (all_private + common) + (1.0 + mu_r) * mu_t * tx_distortion + (1.0 + mu_r) * sigma2;
    let sinr_p = gains[k] / (all_private - gains[k] + shared);
    let sinr_c = common / (all_private + shared);
    (sinr_p, sinr_c)
}

/// Per-user trace quantities every averaged formula is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserTerms {
    /// `Tr(T f_k f_k^H)`.
    pub private_gain: f64,
    /// `Tr(T f_c f_c^H)`.
    pub common_gain: f64,
    /// `Tr(T (F_a + F_b))`.
    pub distorted_total: f64,
    /// `(1 + mu_r) sigma^2`.
    pub noise: f64,
}

impl UserTerms {
    pub fn new(t_bar: &CMatrix, precoder: &Precoder, dist: &DistortionCovariances, noise: f64, k: usize) -> Self {
        Self {
            private_gain: quad_form(t_bar, &precoder.private(k)),
            common_gain: quad_form(t_bar, &precoder.f_common),
            distorted_total: trace_product(t_bar, &dist.f_a) + trace_product(t_bar, &dist.f_b),
            noise,
        }
    }

    pub fn sinr_private(&self) -> Result<f64, RateError> {
        let den = self.distorted_total - self.private_gain + self.noise;
        if !(den > 0.0) {
            return Err(RateError::Degenerate(den));
        }
        Ok(self.private_gain.max(0.0) / den)
    }

    pub fn sinr_common(&self) -> Result<f64, RateError> {
        let den = self.distorted_total + self.noise;
        if !(den > 0.0) {
            return Err(RateError::Degenerate(den));
        }
        Ok(self.common_gain.max(0.0) / den)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RateError {
    #[error("nonpositive SINR denominator {0:e}")]
    Degenerate(f64),
    #[error("infeasible design: {0}")]
    Infeasible(String),
}

pub fn user_terms(stats: &EffectiveChannelStats, precoder: &Precoder, mu_t: f64, mu_r: f64, noise: f64) -> Vec<UserTerms> {
    let dist = distortion_covariances(precoder, mu_t, mu_r);
    stats.t_bar.iter().enumerate().map(|(k, t)| UserTerms::new(t, precoder, &dist, noise, k)).collect()
}

/// HWI-averaged `(gamma_p, gamma_c)` of user `k`.
pub fn average_sinr(t_bar: &CMatrix, precoder: &Precoder, mu_t: f64, mu_r: f64, sigma2: f64, k: usize) -> Result<(f64, f64), RateError> {
    let dist = distortion_covariances(precoder, mu_t, mu_r);
    let terms = UserTerms::new(t_bar, precoder, &dist, (1.0 + mu_r) * sigma2, k);
    Ok((terms.sinr_private()?, terms.sinr_common()?))
}

pub fn rate_bits(sinr: f64) -> f64 {
    sinr.ln_1p() / LN_2
}

/// Per-user `(R_p, R_c)` in bits/s/Hz.
pub fn average_rates(stats: &EffectiveChannelStats, precoder: &Precoder, config: &ScenarioConfig) -> Result<Vec<(f64, f64)>, RateError> {
    user_terms(stats, precoder, config.mu_t, config.mu_r, config.noise_floor())
        .iter()
        .map(|t| Ok((rate_bits(t.sinr_private()?), rate_bits(t.sinr_common()?))))
        .collect()
}

/// `min_k R_c,k`, bits.
pub fn common_rate_cap(stats: &EffectiveChannelStats, precoder: &Precoder, config: &ScenarioConfig) -> Result<f64, RateError> {
    Ok(average_rates(stats, precoder, config)?.iter().map(|r| r.1).fold(f64::INFINITY, f64::min))
}

/// Relative slack allowed when checking `sum c <= cap` and the power budget.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// `sum_k R_p,k + sum_k c_k` in bits; errors if `c` is not feasible.
pub fn objective_sum_rate(stats: &EffectiveChannelStats, precoder: &Precoder, config: &ScenarioConfig) -> Result<f64, RateError> {
    let rates = average_rates(stats, precoder, config)?;
    let cap = rates.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    if let Some(k) = precoder.c_alloc.iter().position(|&c| c < 0.0) {
        return Err(RateError::Infeasible(format!("c_{k} >= 0 violated ({})", precoder.c_alloc[k])));
    }
    let total_c = precoder.c_alloc.sum();
    if total_c > cap + FEASIBILITY_TOL * (1.0 + cap) {
        return Err(RateError::Infeasible(format!("sum c = {total_c} exceeds common-rate cap {cap}")));
    }
    Ok(rates.iter().map(|r| r.0).sum::<f64>() + total_c)
}

/// Independent feasibility check of a full design: power, energy split,
/// `c >= 0` and the common-rate cap.
pub fn check_feasibility(
    stats: &EffectiveChannelStats,
    precoder: &Precoder,
    star: &StarCoefficients,
    config: &ScenarioConfig,
) -> Result<(), RateError> {
    let power = precoder.power();
    if power > config.p_max * (1.0 + FEASIBILITY_TOL) {
        return Err(RateError::Infeasible(format!("power {power} exceeds p_max {}", config.p_max)));
    }
    let split = star.energy_split_error();
    if split > 1e-9 {
        return Err(RateError::Infeasible(format!("energy split off by {split:e}")));
    }
    objective_sum_rate(stats, precoder, config).map(|_| ())
}

/// Scales `c` down uniformly so that `sum c <= cap` (and clamps negatives).
pub fn clip_common_rate(c: &mut DVector<f64>, cap: f64) {
    c.iter_mut().for_each(|v| *v = v.max(0.0));
    let total = c.sum();
    let cap = cap.max(0.0);
    if total > cap && total > 0.0 {
        *c *= cap / total;
    }
}
