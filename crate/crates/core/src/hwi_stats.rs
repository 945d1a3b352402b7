//! Phase-noise statistics of the RIS elements and the HWI-averaged channel
//! correlation `T_k = E{t_k t_k^H}`, with a Monte-Carlo oracle.

use crate::channel::ChannelSet;
use crate::rates::StarCoefficients;
use crate::scenario::Region;
use crate::{CMatrix, CVector};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::{FRAC_2_PI, FRAC_PI_2};

/// `4 / pi^2`, off-diagonal of `E{phi phi^H}`.
pub const CROSS_MOMENT: f64 = FRAC_2_PI * FRAC_2_PI;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseNoiseStats {
    /// `E{phi phi^H}`, real N x N.
    pub second_moment: DMatrix<f64>,
    /// `E{phi_n}` (real, identical for every element).
    pub first_moment_scale: f64,
}

impl PhaseNoiseStats {
    /// Uniform phase error on `[-pi/2, pi/2]`.
    pub fn closed_form(n: usize) -> Self {
        Self { second_moment: phase_second_moment(n), first_moment_scale: FRAC_2_PI }
    }

    /// Point mass at zero phase error.
    pub fn noise_free(n: usize) -> Self {
        Self { second_moment: DMatrix::from_element(n, n, 1.0), first_moment_scale: 1.0 }
    }

    pub fn n(&self) -> usize {
        self.second_moment.nrows()
    }
}

/// `I_N + J`, `J` with off-diagonals `4/pi^2`.
pub fn phase_second_moment(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { CROSS_MOMENT })
}

/// Entries of the phase-error vector, `e^{-j theta}` with theta uniform on
/// `[-pi/2, pi/2]`.
pub fn sample_phase_noise<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    CVector::from_fn(n, |_, _| Complex64::from_polar(1.0, -rng.gen_range(-FRAC_PI_2..=FRAC_PI_2)))
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

fn check_dims(channels: &ChannelSet, star: &StarCoefficients, k: usize, n_stats: usize) -> Result<(), StatsError> {
    let n = channels.n();
    if star.v_t.len() != n || star.v_r.len() != n {
        return Err(StatsError::Dimension(format!("star has {} elements, channel has {n}", star.v_t.len())));
    }
    if n_stats != n {
        return Err(StatsError::Dimension(format!("phase statistics for {n_stats} elements, channel has {n}")));
    }
    if k >= channels.k() {
        return Err(StatsError::Dimension(format!("user {k} out of range")));
    }
    if channels.h[k].len() != channels.m() || channels.g[k].len() != n {
        return Err(StatsError::Dimension(format!("user {k} link sizes do not match M={}, N={n}", channels.m())));
    }
    Ok(())
}

/// `B = G^H diag(g_k) diag(v^*)`, so that `t_k = h_k + B phi^*`.
pub fn cascade_matrix(channels: &ChannelSet, star: &StarCoefficients, k: usize) -> CMatrix {
    let v = star.side(channels.uses_transmit_side(k));
    let mut b = channels.bs_ris.adjoint();
    for (n, mut col) in b.column_iter_mut().enumerate() {
        col *= channels.g[k][n] * v[n].conj();
    }
    b
}

/// Total channel `t_k` for one phase-error vector `phi`.
pub fn total_channel(channels: &ChannelSet, star: &StarCoefficients, k: usize, phi: &CVector) -> CVector {
    &channels.h[k] + cascade_matrix(channels, star, k) * phi.map(|z| z.conj())
}

/// Closed-form `T_k` under the uniform phase-error model.
pub fn effective_correlation(channels: &ChannelSet, star: &StarCoefficients, k: usize) -> Result<CMatrix, StatsError> {
    effective_correlation_with(channels, star, k, &PhaseNoiseStats::closed_form(channels.n()))
}

/// `T_k = h h^H + m (b h^H + h b^H) + B S B^H` with `B` the cascade matrix,
/// `b = B 1`, `m` the first moment and `S` the second moment.
pub fn effective_correlation_with(
    channels: &ChannelSet,
    star: &StarCoefficients,
    k: usize,
    stats: &PhaseNoiseStats,
) -> Result<CMatrix, StatsError> {
    check_dims(channels, star, k, stats.n())?;
    let h = &channels.h[k];
    let mut t = h * h.adjoint();
    if channels.n() == 0 {
        return Ok(t);
    }
    let b = cascade_matrix(channels, star, k);
    let b1: CVector = b.column_sum();
    let m = Complex64::new(stats.first_moment_scale, 0.0);
    let cross = &b1 * h.adjoint() * m;
    t += &cross + cross.adjoint();
    let s = stats.second_moment.map(|v| Complex64::new(v, 0.0));
    t += &b * s * b.adjoint();
    Ok(hermitian_part(t))
}

pub(crate) fn hermitian_part(x: CMatrix) -> CMatrix {
    (&x + x.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Empirical mean of `t_k t_k^H` over `n_samples` phase-error draws.
pub fn mc_effective_correlation<R: Rng + ?Sized>(
    channels: &ChannelSet,
    star: &StarCoefficients,
    k: usize,
    n_samples: usize,
    rng: &mut R,
) -> Result<CMatrix, StatsError> {
    mc_effective_correlation_with(channels, star, k, n_samples, |n| sample_phase_noise(n, rng))
}

/// Same estimator with a caller-supplied phase-error sampler.
pub fn mc_effective_correlation_with<F: FnMut(usize) -> CVector>(
    channels: &ChannelSet,
    star: &StarCoefficients,
    k: usize,
    n_samples: usize,
    mut sampler: F,
) -> Result<CMatrix, StatsError> {
    check_dims(channels, star, k, channels.n())?;
    let n_samples = n_samples.max(1);
    let b = cascade_matrix(channels, star, k);
    let m = channels.m();
    let mut acc = CMatrix::zeros(m, m);
    for _ in 0..n_samples {
        let phi = sampler(channels.n());
        let t = &channels.h[k] + &b * phi.map(|z| z.conj());
        acc.ger(Complex64::new(1.0, 0.0), &t, &t.conjugate(), Complex64::new(1.0, 0.0));
    }
    Ok(hermitian_part(acc / Complex64::new(n_samples as f64, 0.0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannelStats {
    pub t_bar: Vec<CMatrix>,
    pub region_of: Vec<Region>,
}

impl EffectiveChannelStats {
    pub fn compute(channels: &ChannelSet, star: &StarCoefficients, stats: &PhaseNoiseStats) -> Result<Self, StatsError> {
        let t_bar = (0..channels.k())
            .map(|k| effective_correlation_with(channels, star, k, stats))
            .collect::<Result<Vec<_>, _>>()?;
        let region_of = (0..channels.k())
            .map(|k| if channels.uses_transmit_side(k) { Region::Reflection } else { Region::Transmission })
            .collect();
        Ok(Self { t_bar, region_of })
    }

    pub fn k(&self) -> usize {
        self.t_bar.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_instance(seed: u64, m: usize, n: usize) -> (ChannelSet, StarCoefficients) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cn = || c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        let h = vec![CVector::from_fn(m, |_, _| cn()), CVector::from_fn(m, |_, _| cn())];
        let bs_ris = CMatrix::from_fn(n, m, |_, _| cn());
        let g = vec![CVector::from_fn(n, |_, _| cn()), CVector::from_fn(n, |_, _| cn())];
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        let pt: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        let pr: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        let beta: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let star = StarCoefficients {
            v_t: CVector::from_fn(n, |i, _| Complex64::from_polar(beta[i].sqrt(), pt[i])),
            v_r: CVector::from_fn(n, |i, _| Complex64::from_polar((1.0 - beta[i]).sqrt(), pr[i])),
        };
        (ChannelSet { h, bs_ris, g, k0: 1 }, star)
    }

    #[test]
    fn second_moment_values() {
        assert_eq!(phase_second_moment(1), DMatrix::from_element(1, 1, 1.0));
        let s = phase_second_moment(2);
        assert!((s[(0, 1)] - 0.405285).abs() < 1e-6 && s[(1, 0)] == s[(0, 1)] && s[(0, 0)] == 1.0);
        let ev = nalgebra::SymmetricEigen::new(phase_second_moment(6)).eigenvalues;
        assert!(ev.min() > 0.0);
    }

    #[test]
    fn samples_unit_modulus_with_expected_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 200_000;
        let v = sample_phase_noise(n, &mut rng);
        assert!(v.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
        let mean = v.sum() / c(n as f64, 0.0);
        let se = (0.5 - FRAC_2_PI * FRAC_2_PI + 0.5).sqrt() / (n as f64).sqrt();
        assert!((mean.re - FRAC_2_PI).abs() < 3.0 * se, "{mean}");
        assert!(mean.im.abs() < 3.0 * (0.5f64).sqrt() / (n as f64).sqrt());
    }

    #[test]
    fn no_ris_path_leaves_direct_link() {
        let (mut ch, star) = random_instance(1, 3, 4);
        ch.g[0] = CVector::zeros(4);
        let t = effective_correlation(&ch, &star, 0).unwrap();
        assert!((t - &ch.h[0] * ch.h[0].adjoint()).norm() < 1e-15);
    }

    #[test]
    fn scalar_case_is_one() {
        let ch = ChannelSet {
            h: vec![CVector::zeros(1)],
            bs_ris: CMatrix::from_element(1, 1, c(1.0, 0.0)),
            g: vec![CVector::from_element(1, c(1.0, 0.0))],
            k0: 1,
        };
        let star = StarCoefficients { v_t: CVector::from_element(1, c(1.0, 0.0)), v_r: CVector::zeros(1) };
        let t = effective_correlation(&ch, &star, 0).unwrap();
        assert!((t[(0, 0)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matches_monte_carlo_and_is_psd() {
        let (ch, star) = random_instance(3, 3, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 0..2 {
            let t = effective_correlation(&ch, &star, k).unwrap();
            let mc = mc_effective_correlation(&ch, &star, k, 100_000, &mut rng).unwrap();
            assert!((&t - &mc).norm() / t.norm() < 0.01);
            assert!((&mc - mc.adjoint()).norm() < 1e-12);
            let ev = nalgebra::SymmetricEigen::new(t).eigenvalues;
            assert!(ev.min() >= -1e-10);
        }
    }

    #[test]
    fn noise_free_switch_recovers_direct_outer_product() {
        let (ch, star) = random_instance(8, 2, 5);
        let t = effective_correlation_with(&ch, &star, 1, &PhaseNoiseStats::noise_free(5)).unwrap();
        let ones = CVector::from_element(5, c(1.0, 0.0));
        let tk = total_channel(&ch, &star, 1, &ones);
        assert!((&t - &tk * tk.adjoint()).norm() < 1e-12 * (1.0 + t.norm()));
        let mc = mc_effective_correlation_with(&ch, &star, 1, 1, |n| CVector::from_element(n, c(1.0, 0.0))).unwrap();
        assert!((mc - &tk * tk.adjoint()).norm() < 1e-13);
    }

    #[test]
    fn dimension_errors() {
        let (ch, star) = random_instance(1, 2, 3);
        assert!(effective_correlation(&ch, &StarCoefficients::empty(), 0).is_err());
        assert!(effective_correlation(&ch, &star, 5).is_err());
    }

    #[test]
    fn zero_elements_path() {
        let ch = ChannelSet {
            h: vec![CVector::from_element(2, c(1.0, 1.0))],
            bs_ris: CMatrix::zeros(0, 2),
            g: vec![CVector::zeros(0)],
            k0: 1,
        };
        let t = effective_correlation(&ch, &StarCoefficients::empty(), 0).unwrap();
        assert!((t - &ch.h[0] * ch.h[0].adjoint()).norm() < 1e-15);
    }
}
