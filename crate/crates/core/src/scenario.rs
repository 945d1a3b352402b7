//! Experiment configuration, node geometry, unit conversions and seeded
//! random streams.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RisMode {
    Star,
    Conventional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignMode {
    Robust,
    NonRobust,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// BS antennas.
    #[serde(rename = "M")]
    pub m: usize,
    /// STAR-RIS elements.
    #[serde(rename = "N")]
    pub n: usize,
    /// Users.
    #[serde(rename = "K")]
    pub k: usize,
    /// Users `0..k0` sit in the first region and see `v_t`.
    pub k0: usize,
    /// Watts.
    pub p_max: f64,
    pub mu_t: f64,
    pub mu_r: f64,
    pub noise_dbm: f64,
    /// Linear Rician factor.
    pub rician_factor: f64,
    pub l0_db: f64,
    #[serde(rename = "exp_G")]
    pub exp_bs_ris: f64,
    #[serde(rename = "exp_g")]
    pub exp_ris_user: f64,
    #[serde(rename = "exp_h")]
    pub exp_direct: f64,
    pub bs_pos: [f64; 2],
    pub ris_pos: [f64; 2],
    pub region_centers: [[f64; 2]; 2],
    pub region_radius: f64,
    pub conv_eps: f64,
    pub seed: u64,
    pub ris_mode: RisMode,
    pub design_mode: DesignMode,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            m: 4,
            n: 10,
            k: 4,
            k0: 2,
            p_max: 5.0,
            mu_t: 0.01,
            mu_r: 0.01,
            noise_dbm: -70.0,
            rician_factor: 10.0,
            l0_db: -30.0,
            exp_bs_ris: 2.6,
            exp_ris_user: 2.2,
            exp_direct: 5.0,
            bs_pos: [0.0, 0.0],
            ris_pos: [40.0, 0.0],
            region_centers: [[-2.0, 40.0], [2.0, 40.0]],
            region_radius: 2.0,
            conv_eps: 1e-4,
            seed: 1,
            ris_mode: RisMode::Star,
            design_mode: DesignMode::Robust,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("override `{0}` is not of the form key=value")]
    Override(String),
    #[error("{0}")]
    Invalid(ValidationReport),
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    /// Applies `key=value` overrides (value parsed as JSON, falling back to a
    /// bare string so `ris_mode=conventional` works unquoted).
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self, ConfigError> {
        let mut value = serde_json::to_value(self)?;
        let obj = value.as_object_mut().expect("config serializes to an object");
        for raw in overrides {
            let raw = raw.as_ref().trim_start_matches("--");
            let (key, val) = raw.split_once('=').ok_or_else(|| ConfigError::Override(raw.to_string()))?;
            let parsed = serde_json::from_str(val).unwrap_or_else(|_| serde_json::Value::String(val.to_string()));
            obj.insert(key.to_string(), parsed);
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn sigma2(&self) -> f64 {
        noise_power_watts(self.noise_dbm)
    }

    /// `(1 + mu_r) sigma^2`, the effective noise floor of every SINR.
    pub fn noise_floor(&self) -> f64 {
        (1.0 + self.mu_r) * self.sigma2()
    }

    pub fn validated(self) -> Result<Self, ConfigError> {
        let report = validate(&self);
        if report.is_ok() {
            Ok(self)
        } else {
            Err(ConfigError::Invalid(report))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub rule: &'static str,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn mentions(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "pass");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| format!("{}: {}", v.field, v.rule)).collect();
        write!(f, "fail: {}", parts.join("; "))
    }
}

pub fn validate(config: &ScenarioConfig) -> ValidationReport {
    let mut violations = Vec::new();
    let mut check = |ok: bool, field: &'static str, rule: &'static str| {
        if !ok {
            violations.push(Violation { field, rule });
        }
    };
    check(config.m >= 1, "M", "M >= 1");
    check(config.n >= 1, "N", "N >= 1");
    check(config.k >= 2, "K", "K >= 2");
    check(config.k0 >= 1, "k0", "k0 >= 1");
    check(config.k0 < config.k, "k0", "k0 < K");
    check(config.p_max > 0.0 && config.p_max.is_finite(), "p_max", "p_max > 0");
    check(config.mu_t >= 0.0 && config.mu_t.is_finite(), "mu_t", "mu_t >= 0");
    check(config.mu_r >= 0.0 && config.mu_r.is_finite(), "mu_r", "mu_r >= 0");
    check(config.region_radius > 0.0 && config.region_radius.is_finite(), "region_radius", "region_radius > 0");
    check(config.noise_dbm.is_finite(), "noise_dbm", "finite");
    check(config.rician_factor >= 0.0, "rician_factor", "rician_factor >= 0");
    check(config.l0_db.is_finite(), "l0_db", "finite");
    check(config.conv_eps > 0.0, "conv_eps", "conv_eps > 0");
    check(
        config.ris_mode != RisMode::Conventional || config.n.is_multiple_of(2),
        "N",
        "N even",
    );
    ValidationReport { violations }
}

/// dBm to watts.
pub fn noise_power_watts(noise_dbm: f64) -> f64 {
    10f64.powf((noise_dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Reflection,
    Transmission,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserLayout {
    pub positions: Vec<[f64; 2]>,
    pub region_of: Vec<Region>,
}

/// Independent random streams derived from one scenario seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Layout = 1,
    Channel = 2,
    Init = 3,
    PhaseNoise = 4,
}

pub fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Uniform placement over each region disc: users `0..k0` in the first
/// disc, the rest in the second.
pub fn place_users<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> UserLayout {
    let mut positions = Vec::with_capacity(config.k);
    let mut region_of = Vec::with_capacity(config.k);
    for k in 0..config.k {
        let (center, region) = if k < config.k0 {
            (config.region_centers[0], Region::Reflection)
        } else {
            (config.region_centers[1], Region::Transmission)
        };
        let r = config.region_radius * rng.gen::<f64>().sqrt();
        let phi = 2.0 * PI * rng.gen::<f64>();
        positions.push([center[0] + r * phi.cos(), center[1] + r * phi.sin()]);
        region_of.push(region);
    }
    UserLayout { positions, region_of }
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_table_config_passes() {
        let c = ScenarioConfig::default();
        assert_eq!((c.m, c.k, c.noise_dbm, c.rician_factor, c.l0_db), (4, 4, -70.0, 10.0, -30.0));
        assert_eq!((c.exp_bs_ris, c.exp_ris_user, c.exp_direct, c.conv_eps), (2.6, 2.2, 5.0, 1e-4));
        assert!(validate(&c).is_ok());
    }

    #[test]
    fn k0_equal_k_fails() {
        let c = ScenarioConfig { k0: 4, ..Default::default() };
        let r = validate(&c);
        assert!(r.mentions("k0 < K"));
        assert_eq!(r.violations[0].field, "k0");
    }

    #[test]
    fn conventional_needs_even_n() {
        let c = ScenarioConfig { n: 7, ris_mode: RisMode::Conventional, ..Default::default() };
        assert!(validate(&c).mentions("N even"));
        let c = ScenarioConfig { n: 8, ris_mode: RisMode::Conventional, ..Default::default() };
        assert!(validate(&c).is_ok());
    }

    #[test]
    fn dbm_conversions() {
        assert!((noise_power_watts(-70.0) - 1e-10).abs() < 1e-22);
        assert!((noise_power_watts(0.0) - 1e-3).abs() < 1e-15);
        assert!((noise_power_watts(30.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_radius_puts_users_on_centers() {
        let c = ScenarioConfig { region_radius: 0.0, ..Default::default() };
        let layout = place_users(&c, &mut rng_for(3, Stream::Layout));
        for (k, p) in layout.positions.iter().enumerate() {
            let want = if k < c.k0 { c.region_centers[0] } else { c.region_centers[1] };
            assert_eq!(*p, want);
        }
        assert_eq!(layout.region_of, vec![Region::Reflection, Region::Reflection, Region::Transmission, Region::Transmission]);
    }

    #[test]
    fn layout_is_deterministic() {
        let c = ScenarioConfig::default();
        let a = place_users(&c, &mut rng_for(9, Stream::Layout));
        let b = place_users(&c, &mut rng_for(9, Stream::Layout));
        assert_eq!(a, b);
        let other = place_users(&c, &mut rng_for(10, Stream::Layout));
        assert_ne!(a, other);
    }

    #[test]
    fn mean_radius_of_uniform_disc() {
        let c = ScenarioConfig { k: 2, k0: 1, ..Default::default() };
        let mut rng = rng_for(1, Stream::Layout);
        let draws = 50_000;
        let mut total = 0.0;
        for _ in 0..draws {
            let l = place_users(&c, &mut rng);
            total += distance(l.positions[0], c.region_centers[0]);
            total += distance(l.positions[1], c.region_centers[1]);
        }
        let mean = total / (2 * draws) as f64;
        assert!((mean - 4.0 / 3.0).abs() < 0.01 * 4.0 / 3.0, "{mean}");
    }

    #[test]
    fn json_roundtrip_and_overrides() {
        let c = ScenarioConfig::default();
        let text = c.to_json();
        assert!(text.contains("\"M\"") && text.contains("\"exp_G\"") && text.contains("\"ris_mode\": \"star\""));
        assert_eq!(ScenarioConfig::from_json(&text).unwrap(), c);
        let o = c.with_overrides(&["--N=20", "p_max=10", "ris_mode=conventional", "design_mode=\"non_robust\""]).unwrap();
        assert_eq!(o.n, 20);
        assert_eq!(o.p_max, 10.0);
        assert_eq!(o.ris_mode, RisMode::Conventional);
        assert_eq!(o.design_mode, DesignMode::NonRobust);
        assert!(c.with_overrides(&["bogus=1"]).is_err());
        assert!(c.with_overrides(&["N"]).is_err());
    }
}
