//! Parameter sweeps over paired channel draws, CSV / SVG output and the
//! statistics self-check behind `validate-stats`.

use crate::ao::{run, AoError, AoResult};
use crate::channel::{draw_channels, ChannelError, ChannelSet};
use crate::hwi_stats::{
    effective_correlation_with, mc_effective_correlation, sample_phase_noise, PhaseNoiseStats, CROSS_MOMENT,
};
use crate::rates::StarCoefficients;
use crate::scenario::{rng_for, validate, DesignMode, RisMode, ScenarioConfig, Stream};
use crate::subproblems::lift;
use crate::{CMatrix, CVector};
use num_complex::Complex64;
use plotters::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_2_PI, PI};
use std::fmt;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid sweep: {0}")]
    Spec(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("plot: {0}")]
    Plot(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    RsmaStarRobust,
    RsmaStarNonrobust,
    RsmaRisRobust,
    RsmaRisNonrobust,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::RsmaStarRobust, Scheme::RsmaStarNonrobust, Scheme::RsmaRisRobust, Scheme::RsmaRisNonrobust];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::RsmaStarRobust => "rsma_star_robust",
            Scheme::RsmaStarNonrobust => "rsma_star_nonrobust",
            Scheme::RsmaRisRobust => "rsma_ris_robust",
            Scheme::RsmaRisNonrobust => "rsma_ris_nonrobust",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn ris_mode(self) -> RisMode {
        match self {
            Scheme::RsmaStarRobust | Scheme::RsmaStarNonrobust => RisMode::Star,
            Scheme::RsmaRisRobust | Scheme::RsmaRisNonrobust => RisMode::Conventional,
        }
    }

    pub fn design_mode(self) -> DesignMode {
        match self {
            Scheme::RsmaStarRobust | Scheme::RsmaRisRobust => DesignMode::Robust,
            Scheme::RsmaStarNonrobust | Scheme::RsmaRisNonrobust => DesignMode::NonRobust,
        }
    }

    pub fn apply(self, config: &ScenarioConfig) -> ScenarioConfig {
        ScenarioConfig { ris_mode: self.ris_mode(), design_mode: self.design_mode(), ..config.clone() }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// STAR-RIS element count `N`.
    Elements,
    /// Transmit power budget in watts.
    Power,
    /// `mu_t = mu_r`, swept jointly.
    Hwi,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Elements => "elements",
            SweepAxis::Power => "power",
            SweepAxis::Hwi => "hwi",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [SweepAxis::Elements, SweepAxis::Power, SweepAxis::Hwi].into_iter().find(|a| a.name() == name)
    }

    fn label(self) -> &'static str {
        match self {
            SweepAxis::Elements => "number of elements N",
            SweepAxis::Power => "transmit power P_max (W)",
            SweepAxis::Hwi => "HWI coefficient mu_t = mu_r",
        }
    }

    pub fn apply(self, config: &ScenarioConfig, value: f64) -> ScenarioConfig {
        let mut c = config.clone();
        match self {
            SweepAxis::Elements => c.n = value.round() as usize,
            SweepAxis::Power => c.p_max = value,
            SweepAxis::Hwi => {
                c.mu_t = value;
                c.mu_r = value;
            }
        }
        c
    }
}

pub const DEFAULT_DRAWS: usize = 20;

fn default_draws() -> usize {
    DEFAULT_DRAWS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    #[serde(default = "default_draws")]
    pub n_channel_draws: usize,
    #[serde(default)]
    pub base_config: ScenarioConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.n_channel_draws == 0 {
            return Err(ExperimentError::Spec("n_channel_draws must be at least 1".into()));
        }
        if self.values.windows(2).any(|w| !(w[1] > w[0])) || self.values.iter().any(|v| !v.is_finite()) {
            return Err(ExperimentError::Spec("values must be finite and strictly increasing".into()));
        }
        for &v in &self.values {
            for &s in &self.schemes {
                let cfg = s.apply(&self.axis.apply(&self.base_config, v));
                let report = validate(&cfg);
                if !report.is_ok() {
                    return Err(ExperimentError::Spec(format!("{} = {v}: {report}", self.axis.name())));
                }
            }
        }
        Ok(())
    }

    /// Scenario of one cell and draw. Draw `d` uses seed `base + d` for every
    /// scheme and value, so comparisons are paired.
    pub fn cell_config(&self, scheme: Scheme, value: f64, draw: usize) -> ScenarioConfig {
        let mut cfg = scheme.apply(&self.axis.apply(&self.base_config, value));
        cfg.seed = self.base_config.seed.wrapping_add(draw as u64);
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub draw: usize,
    pub seed: u64,
    /// `Err` carries the failure message.
    pub outcome: Result<RunSummary, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub rate_bits: f64,
    pub iterations: usize,
    pub converged: bool,
    pub seconds: f64,
}

impl From<&AoResult> for RunSummary {
    fn from(r: &AoResult) -> Self {
        Self { rate_bits: r.objective_bits, iterations: r.iterations, converged: r.converged, seconds: r.seconds }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub scheme: Scheme,
    pub value: f64,
    pub runs: Vec<RunRecord>,
}

impl CellResult {
    fn ok(&self) -> impl Iterator<Item = &RunSummary> {
        self.runs.iter().filter_map(|r| r.outcome.as_ref().ok())
    }

    pub fn n_ok(&self) -> usize {
        self.ok().count()
    }

    pub fn n_fail(&self) -> usize {
        self.runs.len() - self.n_ok()
    }

    fn mean_of(&self, f: impl Fn(&RunSummary) -> f64) -> f64 {
        let n = self.n_ok();
        if n == 0 {
            return f64::NAN;
        }
        self.ok().map(f).sum::<f64>() / n as f64
    }

    pub fn mean_rate(&self) -> f64 {
        self.mean_of(|r| r.rate_bits)
    }

    /// Sample standard deviation (zero for a single run).
    pub fn std_rate(&self) -> f64 {
        let n = self.n_ok();
        if n < 2 {
            return if n == 1 { 0.0 } else { f64::NAN };
        }
        let mean = self.mean_rate();
        (self.ok().map(|r| (r.rate_bits - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }

    pub fn mean_iterations(&self) -> f64 {
        self.mean_of(|r| r.iterations as f64)
    }

    pub fn mean_seconds(&self) -> f64 {
        self.mean_of(|r| r.seconds)
    }

    pub fn rate_of_draw(&self, draw: usize) -> Option<f64> {
        self.runs.iter().find(|r| r.draw == draw).and_then(|r| r.outcome.as_ref().ok()).map(|r| r.rate_bits)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub n_channel_draws: usize,
    /// Scheme-major, values in sweep order.
    pub cells: Vec<CellResult>,
}

/// Paired difference of two cells over the draws both completed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedGap {
    pub n_pairs: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    /// `mean(a - b)`.
    pub mean_diff: f64,
    /// `mean(a - b) / mean(b)`, percent.
    pub percent: f64,
    /// Draws with `a > b`.
    pub wins: usize,
}

impl SweepResult {
    pub fn cell(&self, scheme: Scheme, value: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.scheme == scheme && c.value == value)
    }

    pub fn paired_gap(&self, a: (Scheme, f64), b: (Scheme, f64)) -> Option<PairedGap> {
        let (ca, cb) = (self.cell(a.0, a.1)?, self.cell(b.0, b.1)?);
        let pairs: Vec<(f64, f64)> =
            (0..self.n_channel_draws).filter_map(|d| Some((ca.rate_of_draw(d)?, cb.rate_of_draw(d)?))).collect();
        if pairs.is_empty() {
            return None;
        }
        let n = pairs.len() as f64;
        let mean_a = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let mean_b = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        Some(PairedGap {
            n_pairs: pairs.len(),
            mean_a,
            mean_b,
            mean_diff: mean_a - mean_b,
            percent: 100.0 * (mean_a - mean_b) / mean_b,
            wins: pairs.iter().filter(|p| p.0 > p.1).count(),
        })
    }
}

fn run_one(cfg: &ScenarioConfig, channels: &Result<ChannelSet, String>) -> Result<RunSummary, String> {
    let ch = channels.as_ref().map_err(Clone::clone)?;
    run(cfg, ch).map(|r| RunSummary::from(&r)).map_err(|e: AoError| e.to_string())
}

/// Runs every (scheme, value, draw) on the rayon pool. A failed run is
/// recorded in its cell and the sweep carries on.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, ExperimentError> {
    spec.validate()?;
    let draws: Vec<(usize, usize)> =
        (0..spec.values.len()).flat_map(|v| (0..spec.n_channel_draws).map(move |d| (v, d))).collect();
    // channels depend on the value only through N; share them across schemes
    let channels: Vec<Result<ChannelSet, String>> = draws
        .par_iter()
        .map(|&(v, d)| {
            let cfg = spec.cell_config(Scheme::RsmaStarRobust, spec.values[v], d);
            draw_channels(&cfg).map(|(_, ch)| ch).map_err(|e: ChannelError| e.to_string())
        })
        .collect();
    let tasks: Vec<(usize, usize)> = (0..spec.schemes.len()).flat_map(|s| (0..draws.len()).map(move |i| (s, i))).collect();
    let records: Vec<RunRecord> = tasks
        .par_iter()
        .map(|&(s, i)| {
            let (v, d) = draws[i];
            let cfg = spec.cell_config(spec.schemes[s], spec.values[v], d);
            let outcome = run_one(&cfg, &channels[i]);
            if let Err(e) = &outcome {
                log::warn!("{} {}={} seed {}: {e}", spec.schemes[s], spec.axis.name(), spec.values[v], cfg.seed);
            }
            RunRecord { draw: d, seed: cfg.seed, outcome }
        })
        .collect();

    let mut records = records.into_iter();
    let mut cells = Vec::with_capacity(spec.schemes.len() * spec.values.len());
    for &scheme in &spec.schemes {
        for &value in &spec.values {
            let runs = records.by_ref().take(spec.n_channel_draws).collect();
            cells.push(CellResult { scheme, value, runs });
        }
    }
    Ok(SweepResult {
        axis: spec.axis,
        values: spec.values.clone(),
        schemes: spec.schemes.clone(),
        n_channel_draws: spec.n_channel_draws,
        cells,
    })
}

pub const CSV_HEADER: [&str; 9] =
    ["scheme", "axis", "value", "mean_rate_bps_hz", "std_rate", "mean_iters", "mean_seconds", "n_ok", "n_fail"];

/// Twelve significant digits in scientific notation.
pub fn format_sig12(v: f64) -> String {
    format!("{v:.11e}")
}

pub fn write_csv<W: std::io::Write>(result: &SweepResult, out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for c in &result.cells {
        w.write_record([
            c.scheme.name().to_string(),
            result.axis.name().to_string(),
            format_sig12(c.value),
            format_sig12(c.mean_rate()),
            format_sig12(c.std_rate()),
            format_sig12(c.mean_iterations()),
            format_sig12(c.mean_seconds()),
            c.n_ok().to_string(),
            c.n_fail().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<(), ExperimentError> {
    write_csv(result, std::fs::File::create(path)?)
}

const PALETTE: [RGBColor; 4] = [RGBColor(31, 119, 180), RGBColor(214, 39, 40), RGBColor(44, 160, 44), RGBColor(148, 103, 189)];

fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 * lo.abs().max(1.0) };
    (lo - pad, hi + pad)
}

/// SVG with one polyline per scheme (mean rate per value), markers, axis
/// labels and a legend.
pub fn render_svg(result: &SweepResult) -> Result<String, ExperimentError> {
    let plot_err = |e: &dyn fmt::Display| ExperimentError::Plot(e.to_string());
    let mut buf = String::new();
    {
        let root = SVGBackend::with_string(&mut buf, (720, 480)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| plot_err(&e))?;
        let (x0, x1) = padded_range(
            result.values.first().copied().unwrap_or(0.0),
            result.values.last().copied().unwrap_or(1.0),
        );
        let rates: Vec<f64> = result.cells.iter().map(CellResult::mean_rate).filter(|v| v.is_finite()).collect();
        let (y0, y1) = padded_range(
            rates.iter().copied().fold(f64::INFINITY, f64::min),
            rates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        );
        let mut chart = ChartBuilder::on(&root)
            .caption(format!("sum rate vs {}", result.axis.name()), ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(45)
            .y_label_area_size(60)
            .build_cartesian_2d(x0..x1, y0..y1)
            .map_err(|e| plot_err(&e))?;
        chart
            .configure_mesh()
            .x_desc(result.axis.label())
            .y_desc("sum rate (bits/s/Hz)")
            .draw()
            .map_err(|e| plot_err(&e))?;
        for (i, &scheme) in result.schemes.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let points: Vec<(f64, f64)> = result
                .cells
                .iter()
                .filter(|c| c.scheme == scheme && c.mean_rate().is_finite())
                .map(|c| (c.value, c.mean_rate()))
                .collect();
            chart
                .draw_series(LineSeries::new(points.clone(), color.stroke_width(2)))
                .map_err(|e| plot_err(&e))?
                .label(scheme.name())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
            chart
                .draw_series(points.into_iter().map(|p| Circle::new(p, 4, color.filled())))
                .map_err(|e| plot_err(&e))?;
        }
        if !result.schemes.is_empty() {
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()
                .map_err(|e| plot_err(&e))?;
        }
        root.present().map_err(|e| plot_err(&e))?;
    }
    Ok(buf)
}

pub fn emit_plot(result: &SweepResult, path: &Path) -> Result<(), ExperimentError> {
    let svg = render_svg(result)?;
    std::fs::write(path, svg)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckOutcome {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub outcome: CheckOutcome,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.outcome {
            CheckOutcome::Pass => "PASS",
            CheckOutcome::Fail => "FAIL",
            CheckOutcome::Skipped => "SKIP",
        };
        write!(f, "{tag} {:<28} measured {:.3e} tolerance {:.3e}  {}", self.name, self.measured, self.tolerance, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub checks: Vec<CheckResult>,
}

impl StatsReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.outcome != CheckOutcome::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateOptions {
    /// Scalar phase-error samples for the moment checks.
    pub moment_samples: usize,
    /// Random (channel, STAR) instances for the correlation check.
    pub instances: usize,
    /// Phase-error vectors per correlation estimate.
    pub correlation_samples: usize,
    /// Random points for the lifting identities.
    pub lifting_points: usize,
    /// Debug hook: replaces the closed-form off-diagonal second moment.
    pub tamper_off_diagonal: Option<f64>,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self { moment_samples: 1_000_000, instances: 10, correlation_samples: 100_000, lifting_points: 100, tamper_off_diagonal: None }
    }
}

fn check(name: &'static str, measured: f64, tolerance: f64, detail: String) -> CheckResult {
    let outcome = if measured <= tolerance { CheckOutcome::Pass } else { CheckOutcome::Fail };
    CheckResult { name, outcome, measured, tolerance, detail }
}

fn skipped(name: &'static str, detail: &str) -> CheckResult {
    CheckResult { name, outcome: CheckOutcome::Skipped, measured: f64::NAN, tolerance: f64::NAN, detail: detail.into() }
}

fn model_stats(n: usize, opts: &ValidateOptions) -> PhaseNoiseStats {
    let mut stats = PhaseNoiseStats::closed_form(n);
    if let Some(v) = opts.tamper_off_diagonal {
        stats.second_moment = nalgebra::DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { v });
    }
    stats
}

fn random_star<R: Rng + ?Sized>(n: usize, rng: &mut R) -> StarCoefficients {
    let mut star = StarCoefficients { v_t: CVector::zeros(n), v_r: CVector::zeros(n) };
    for i in 0..n {
        let beta: f64 = rng.gen();
        star.v_t[i] = Complex64::from_polar(beta.sqrt(), rng.gen_range(0.0..2.0 * PI));
        star.v_r[i] = Complex64::from_polar((1.0 - beta).sqrt(), rng.gen_range(0.0..2.0 * PI));
    }
    star
}

fn cn<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * std::f64::consts::FRAC_1_SQRT_2
}

/// Empirical `E{e^{-j theta}}` against the model first moment, in standard
/// errors.
pub fn check_first_moment<R: Rng + ?Sized>(samples: usize, stats: &PhaseNoiseStats, rng: &mut R) -> CheckResult {
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let v = sample_phase_noise(1, rng)[0].re;
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let se = ((sum_sq / n - mean * mean) / n).sqrt();
    let z = (mean - stats.first_moment_scale).abs() / se;
    check("first_moment", z, 3.0, format!("mc {mean:.6} model {:.6} (2/pi = {FRAC_2_PI:.6}), |z| vs 3 SE", stats.first_moment_scale))
}

/// Empirical `E{phi_1 phi_2^*}` against the model off-diagonal, in
/// standard errors.
pub fn check_cross_moment<R: Rng + ?Sized>(samples: usize, stats: &PhaseNoiseStats, rng: &mut R) -> CheckResult {
    if stats.n() < 2 {
        return skipped("cross_moment", "needs two elements");
    }
    let (mut sum, mut sum_sq) = (Complex64::new(0.0, 0.0), 0.0);
    for _ in 0..samples {
        let phi = sample_phase_noise(2, rng);
        let v = phi[0] * phi[1].conj();
        sum += v;
        sum_sq += v.norm_sqr();
    }
    let n = samples as f64;
    let mean = sum / n;
    let se = ((sum_sq / n - mean.norm_sqr()) / n).sqrt();
    let model = stats.second_moment[(0, 1)];
    let z = (mean - model).norm() / se;
    check("cross_moment", z, 3.0, format!("mc {:.6} model {model:.6} (4/pi^2 = {CROSS_MOMENT:.6}), |z| vs 3 SE", mean.re))
}

/// Worst relative Frobenius error of the model `T_k` against Monte Carlo
/// over random channels and STAR coefficients.
pub fn check_correlation<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    instances: usize,
    samples: usize,
    stats: &PhaseNoiseStats,
    rng: &mut R,
) -> CheckResult {
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let cfg = ScenarioConfig { seed: config.seed.wrapping_add(i as u64), ..config.clone() };
        let ch = match draw_channels(&cfg) {
            Ok((_, ch)) => ch,
            Err(e) => return check("effective_correlation", f64::INFINITY, 0.01, e.to_string()),
        };
        let star = random_star(cfg.n, rng);
        for k in 0..ch.k() {
            let model = effective_correlation_with(&ch, &star, k, stats);
            let mc = mc_effective_correlation(&ch, &star, k, samples, rng);
            match (model, mc) {
                (Ok(a), Ok(b)) => worst = worst.max((a - &b).norm() / b.norm()),
                (Err(e), _) | (_, Err(e)) => return check("effective_correlation", f64::INFINITY, 0.01, e.to_string()),
            }
        }
    }
    check("effective_correlation", worst, 0.01, format!("{instances} instances x {} users, {samples} samples", config.k))
}

/// `Tr(lift(X) V) = Tr(T X)` with `V = [v; 1][v; 1]^H`, worst relative
/// error over random beams (private, distortion-like and common shapes).
pub fn check_lifting<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    points: usize,
    stats: &PhaseNoiseStats,
    rng: &mut R,
) -> CheckResult {
    let mut worst: f64 = 0.0;
    for i in 0..points {
        let cfg = ScenarioConfig { seed: config.seed.wrapping_add(i as u64), ..config.clone() };
        let ch = match draw_channels(&cfg) {
            Ok((_, ch)) => ch,
            Err(e) => return check("lifting", f64::INFINITY, 1e-9, e.to_string()),
        };
        let star = random_star(cfg.n, rng);
        let f = CMatrix::from_fn(cfg.m, 3, |_, _| cn(rng));
        let x = &f * f.adjoint();
        for k in 0..ch.k() {
            let side = star.side(ch.uses_transmit_side(k));
            let mut u = CVector::zeros(cfg.n + 1);
            for n in 0..cfg.n {
                u[n] = side[n];
            }
            u[cfg.n] = Complex64::new(1.0, 0.0);
            let lifted = (u.adjoint() * lift(&ch, k, &x, stats) * &u)[(0, 0)].re;
            let direct = match effective_correlation_with(&ch, &star, k, stats) {
                Ok(t) => (&t * &x).trace().re,
                Err(e) => return check("lifting", f64::INFINITY, 1e-9, e.to_string()),
            };
            worst = worst.max((lifted - direct).abs() / direct.abs().max(f64::MIN_POSITIVE));
        }
    }
    check("lifting", worst, 1e-9, format!("{points} random points x {} users", config.k))
}

/// Monte-Carlo and identity suite for the phase-noise model and the lifted
/// matrices. Cross-element checks are skipped for a single element.
pub fn validate_stats(config: &ScenarioConfig, opts: &ValidateOptions) -> StatsReport {
    let stats = model_stats(config.n, opts);
    let mut rng = rng_for(config.seed, Stream::PhaseNoise);
    let mut checks = vec![check_first_moment(opts.moment_samples, &stats, &mut rng)];
    checks.push(check_cross_moment(opts.moment_samples, &stats, &mut rng));
    checks.push(check_correlation(config, opts.instances, opts.correlation_samples, &stats, &mut rng));
    checks.push(check_lifting(config, opts.lifting_points, &stats, &mut rng));
    StatsReport { checks }
}
