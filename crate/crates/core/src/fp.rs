//! Fractional-programming surrogate: Lagrangian-dual (`a`) and quadratic
//! (`b`) transforms of the private sum rate, all in nats.

use crate::hwi_stats::EffectiveChannelStats;
use crate::rates::{user_terms, Precoder, RateError, UserTerms};
use crate::scenario::ScenarioConfig;
use std::f64::consts::LN_2;

#[derive(Debug, Clone, PartialEq)]
pub struct FpAux {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl FpAux {
    pub fn zeros(k: usize) -> Self {
        Self { a: vec![0.0; k], b: vec![0.0; k] }
    }
}

fn terms(stats: &EffectiveChannelStats, precoder: &Precoder, config: &ScenarioConfig) -> Vec<UserTerms> {
    user_terms(stats, precoder, config.mu_t, config.mu_r, config.noise_floor())
}

/// `a_k = gamma_p,k`.
pub fn update_a(stats: &EffectiveChannelStats, precoder: &Precoder, config: &ScenarioConfig) -> Result<Vec<f64>, RateError> {
    terms(stats, precoder, config).iter().map(UserTerms::sinr_private).collect()
}

pub fn optimal_b(t: &UserTerms, a: f64) -> f64 {
    ((1.0 + a) * t.private_gain.max(0.0)).sqrt() / (t.distorted_total + t.noise)
}

/// `b_k = sqrt((1+a_k) Tr(T f_k f_k^H)) / (Tr(T(F_a+F_b)) + (1+mu_r) sigma^2)`.
pub fn update_b(stats: &EffectiveChannelStats, precoder: &Precoder, a: &[f64], config: &ScenarioConfig) -> Vec<f64> {
    terms(stats, precoder, config).iter().zip(a).map(|(t, &a)| optimal_b(t, a)).collect()
}

pub fn update_aux(stats: &EffectiveChannelStats, precoder: &Precoder, config: &ScenarioConfig) -> Result<FpAux, RateError> {
    let a = update_a(stats, precoder, config)?;
    let b = update_b(stats, precoder, &a, config);
    Ok(FpAux { a, b })
}

/// Surrogate summand of one user without its `c_k`.
pub fn user_surrogate(t: &UserTerms, a: f64, b: f64) -> f64 {
    a.ln_1p() - a + 2.0 * b * ((1.0 + a) * t.private_gain.max(0.0)).sqrt() - b * b * (t.distorted_total + t.noise)
}

/// `f_R = sum_k [ln(1+a) - a + 2b sqrt((1+a) Tr(T f f^H)) - b^2 (Tr(T(F_a+F_b)) + (1+mu_r) sigma^2) + c_k]`,
/// with `c` converted from bits to nats.
pub fn fp_objective(stats: &EffectiveChannelStats, precoder: &Precoder, aux: &FpAux, config: &ScenarioConfig) -> f64 {
    let t = terms(stats, precoder, config);
    let private: f64 = t.iter().zip(aux.a.iter().zip(&aux.b)).map(|(t, (&a, &b))| user_surrogate(t, a, b)).sum();
    private + precoder.c_alloc.sum() * LN_2
}

/// `sum_k ln(1 + gamma_p,k) + sum_k c_k`, nats.
pub fn true_objective_nats(stats: &EffectiveChannelStats, precoder: &Precoder, config: &ScenarioConfig) -> Result<f64, RateError> {
    let t = terms(stats, precoder, config);
    let mut acc = precoder.c_alloc.sum() * LN_2;
    for u in &t {
        acc += u.sinr_private()?.ln_1p();
    }
    Ok(acc)
}
