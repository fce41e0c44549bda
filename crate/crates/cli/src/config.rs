//! TOML run configuration. Every table rejects unknown keys; physical
//! quantities carry their unit in the key name.

use std::path::{Path, PathBuf};

use hopcap::{FadingModel, HopProblem, MacProfile, ScanConfig};
use serde::Deserialize;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Path loss exponent.
    pub eta: Option<f64>,
    /// Transmit power averaged over transmission periods (W).
    pub pt_prime_w: Option<f64>,
    /// Network average power budget (W); needs `[mac]`.
    pub p_bar_w: Option<f64>,
    #[serde(default)]
    pub d0_m: f64,
    pub seed: Option<u64>,
    pub fading: Option<FadingSpec>,
    pub mac: Option<MacSpec>,
    pub grid: Option<GridSpec>,
    pub scan: Option<ScanSpec>,
    #[serde(default)]
    pub simulate: SimulateSpec,
    pub ftt: Option<FttSpec>,
    pub reuse: Option<ReuseSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FadingSpec {
    /// `f(h) = mu e^{-mu h}`.
    Exponential { mu: f64, alpha_over_sigma2: f64 },
    /// `[gain, probability]` pairs.
    Discrete {
        states: Vec<[f64; 2]>,
        alpha_over_sigma2: f64,
    },
    /// Piecewise-linear density from inline `[h, a(h)]` samples or a
    /// two-column CSV file (path relative to the config file).
    Tabulated {
        samples: Option<Vec<[f64; 2]>>,
        csv: Option<PathBuf>,
        #[serde(default)]
        normalize: bool,
        alpha_over_sigma2: f64,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacSpec {
    pub p_i: f64,
    pub p_c: f64,
    pub p_s: f64,
    pub t_i_s: f64,
    pub t_c_s: f64,
    pub t_o_s: f64,
    pub e_i_j: f64,
    pub e_c_j: f64,
    pub e_o_j: f64,
    pub t_s: f64,
    pub w_hz: f64,
}

impl From<MacSpec> for MacProfile {
    fn from(m: MacSpec) -> Self {
        MacProfile {
            p_i: m.p_i,
            p_c: m.p_c,
            p_s: m.p_s,
            t_i: m.t_i_s,
            t_c: m.t_c_s,
            t_o: m.t_o_s,
            e_i: m.e_i_j,
            e_c: m.e_c_j,
            e_o: m.e_o_j,
            t: m.t_s,
            w: m.w_hz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridVariable {
    /// Hop distance in metres.
    D,
    /// Normalized power `P't / d^eta`.
    Pi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub variable: GridVariable,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
    /// Multipliers applied to the transmit power, one curve each.
    #[serde(default = "unit_scale")]
    pub pt_prime_scales: Vec<f64>,
}

fn unit_scale() -> Vec<f64> {
    vec![1.0]
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        if self.points == 0 {
            return Err(CliError::validation("grid.points: grid is empty"));
        }
        let ok =
            self.min.is_finite() && self.max.is_finite() && self.min > 0.0 && self.max >= self.min;
        if !ok {
            return Err(CliError::validation(format!(
                "grid: need 0 < min <= max, got min = {}, max = {}",
                self.min, self.max
            )));
        }
        if self.pt_prime_scales.is_empty()
            || self
                .pt_prime_scales
                .iter()
                .any(|&s| !(s > 0.0 && s.is_finite()))
        {
            return Err(CliError::validation(
                "grid.pt_prime_scales: need at least one positive scale",
            ));
        }
        if self.points == 1 {
            return Ok(vec![self.min]);
        }
        let n = (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|i| {
                let t = i as f64 / n;
                match self.spacing {
                    Spacing::Log => (self.min.ln() + t * (self.max / self.min).ln()).exp(),
                    Spacing::Linear => self.min + t * (self.max - self.min),
                }
            })
            .collect())
    }

    /// Parses the `--grid min:max:points[:log|:linear]` override, keeping the
    /// variable and power scales of `base`.
    pub fn with_override(base: Option<&GridSpec>, text: &str) -> Result<GridSpec, CliError> {
        let bad = || {
            CliError::validation(format!(
                "--grid: expected min:max:points[:log|:linear], got `{text}`"
            ))
        };
        let parts: Vec<&str> = text.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(bad());
        }
        let min = parts[0].trim().parse().map_err(|_| bad())?;
        let max = parts[1].trim().parse().map_err(|_| bad())?;
        let points = parts[2].trim().parse().map_err(|_| bad())?;
        let spacing = match parts.get(3).map(|s| s.trim()) {
            None | Some("log") => Spacing::Log,
            Some("linear") => Spacing::Linear,
            Some(_) => return Err(bad()),
        };
        Ok(GridSpec {
            variable: base.map_or(GridVariable::D, |g| g.variable),
            min,
            max,
            points,
            spacing,
            pt_prime_scales: base.map_or_else(unit_scale, |g| g.pt_prime_scales.clone()),
        })
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub pi_min: f64,
    pub pi_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySpec {
    /// Water-filling at the optimal hop distance.
    #[default]
    WaterfillOptimal,
    /// Water-filling at `d_m`.
    Waterfill,
    /// Constant `power_w` at `d_m`.
    Constant,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "one")]
    pub replications: u64,
    #[serde(default)]
    pub policy: PolicySpec,
    pub d_m: Option<f64>,
    pub power_w: Option<f64>,
    pub relinquish_overhead_s: Option<f64>,
}

impl Default for SimulateSpec {
    fn default() -> Self {
        Self {
            horizon: default_horizon(),
            replications: 1,
            policy: PolicySpec::default(),
            d_m: None,
            power_w: None,
            relinquish_overhead_s: None,
        }
    }
}

fn default_horizon() -> u64 {
    1_000_000
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FttSpec {
    /// `[h1, h2, p1_w, p2_w]` rows.
    #[serde(default)]
    pub tuples: Vec<[f64; 4]>,
    /// Number of extra seeded random tuples.
    #[serde(default)]
    pub random_tuples: usize,
    pub l_bits: f64,
    pub w_hz: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReuseSpec {
    pub area_m2: f64,
    pub k_max: u64,
    /// Log-spaced `K` values reported in the CSV.
    #[serde(default = "default_k_points")]
    pub k_points: usize,
    pub p_w: Vec<f64>,
    pub noise_w: f64,
}

fn default_k_points() -> usize {
    200
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path).map_err(|e| {
            CliError::validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| CliError::validation(format!("{}: not UTF-8: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(text)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::validation(format!(
                "schema_version = {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        if let Some(FadingSpec::Tabulated { csv: Some(p), .. }) = &mut cfg.fading {
            if p.is_relative() {
                *p = path.parent().unwrap_or(Path::new(".")).join(&*p);
            }
        }
        Ok((cfg, bytes))
    }

    pub fn model(&self) -> Result<FadingModel, CliError> {
        let spec = self
            .fading
            .as_ref()
            .ok_or_else(|| CliError::validation("missing [fading] table"))?;
        let model = match spec {
            FadingSpec::Exponential {
                mu,
                alpha_over_sigma2,
            } => FadingModel::exponential(*mu, *alpha_over_sigma2)?,
            FadingSpec::Discrete {
                states,
                alpha_over_sigma2,
            } => {
                let s: Vec<(f64, f64)> = states.iter().map(|&[h, a]| (h, a)).collect();
                FadingModel::discrete(&s, *alpha_over_sigma2)?
            }
            FadingSpec::Tabulated {
                samples,
                csv,
                normalize,
                alpha_over_sigma2,
            } => {
                let s = match (samples, csv) {
                    (Some(s), None) => s.iter().map(|&[h, a]| (h, a)).collect(),
                    (None, Some(p)) => read_density_csv(p)?,
                    _ => {
                        return Err(CliError::validation(
                            "fading: tabulated needs exactly one of `samples` or `csv`",
                        ))
                    }
                };
                if *normalize {
                    FadingModel::tabulated_normalized(&s, *alpha_over_sigma2)?
                } else {
                    FadingModel::tabulated(&s, *alpha_over_sigma2)?
                }
            }
        };
        Ok(model)
    }

    pub fn eta(&self) -> Result<f64, CliError> {
        self.eta
            .ok_or_else(|| CliError::validation("missing `eta`"))
    }

    pub fn profile(&self) -> Result<MacProfile, CliError> {
        let mac: MacProfile = self
            .mac
            .ok_or_else(|| CliError::validation("missing [mac] table"))?
            .into();
        mac.validate()?;
        Ok(mac)
    }

    /// `P't` from `pt_prime_w`, or from `p_bar_w` through the MAC profile.
    pub fn pt_prime(&self) -> Result<f64, CliError> {
        match (self.pt_prime_w, self.p_bar_w) {
            (Some(p), None) => Ok(p),
            (None, Some(p_bar)) => Ok(self.profile()?.pt_prime(p_bar)?),
            (Some(_), Some(_)) => Err(CliError::validation(
                "set only one of `pt_prime_w` and `p_bar_w`",
            )),
            (None, None) => Err(CliError::validation(
                "missing `pt_prime_w` (or `p_bar_w` with [mac])",
            )),
        }
    }

    pub fn problem(&self) -> Result<HopProblem, CliError> {
        Ok(HopProblem::new(
            self.model()?,
            self.eta()?,
            self.pt_prime()?,
            self.d0_m,
        )?)
    }

    pub fn scan(&self) -> Result<ScanConfig, CliError> {
        let Some(s) = self.scan else {
            return Ok(ScanConfig::default());
        };
        if !(s.pi_min > 0.0 && s.pi_max > s.pi_min && s.points >= 2) {
            return Err(CliError::validation(
                "scan: need 0 < pi_min < pi_max and points >= 2",
            ));
        }
        Ok(ScanConfig {
            pi_min: s.pi_min,
            pi_max: s.pi_max,
            points: s.points,
        })
    }
}

/// Two-column `h,a(h)` file; a non-numeric first row is taken as a header.
fn read_density_csv(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        if record.len() != 2 {
            return Err(CliError::validation(format!(
                "{} line {}: expected 2 columns, got {}",
                path.display(),
                i + 1,
                record.len()
            )));
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => out.push((v[0], v[1])),
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(CliError::validation(format!(
                    "{} line {}: {e}",
                    path.display(),
                    i + 1
                )));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_override_keeps_variable_and_scales() {
        let base = GridSpec {
            variable: GridVariable::Pi,
            min: 1.0,
            max: 2.0,
            points: 3,
            spacing: Spacing::Linear,
            pt_prime_scales: vec![1.0, 4.0],
        };
        let g = GridSpec::with_override(Some(&base), "0.01:100:5").unwrap();
        assert_eq!(g.variable, GridVariable::Pi);
        assert_eq!(g.pt_prime_scales, vec![1.0, 4.0]);
        let v = g.values().unwrap();
        assert_eq!(v.len(), 5);
        assert!((v[2] - 1.0).abs() < 1e-15 && (v[4] - 100.0).abs() < 1e-12);
        let lin = GridSpec::with_override(None, "1:3:3:linear")
            .unwrap()
            .values()
            .unwrap();
        assert_eq!(lin, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn grid_rejects_bad_text_and_ranges() {
        for text in ["1:2", "1:2:x", "1:2:3:cubic", "a:b:c"] {
            assert!(GridSpec::with_override(None, text).is_err(), "{text}");
        }
        for text in ["2:1:5", "0:1:5", "1:2:0"] {
            assert!(
                GridSpec::with_override(None, text)
                    .unwrap()
                    .values()
                    .is_err(),
                "{text}"
            );
        }
    }

    #[test]
    fn power_is_given_exactly_once() {
        let text = "schema_version = 1\npt_prime_w = 1.0\np_bar_w = 2.0\n";
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert!(matches!(cfg.pt_prime(), Err(CliError::Validation(_))));
        let cfg: RunConfig = toml::from_str("schema_version = 1\n").unwrap();
        assert!(cfg.pt_prime().is_err());
    }

    #[test]
    fn unknown_fading_key_is_rejected() {
        let text = "schema_version = 1\n[fading]\nkind = \"exponential\"\nmu = 1.0\nalpha_over_sigma2 = 1.0\nsigma = 3\n";
        assert!(toml::from_str::<RunConfig>(text).is_err());
    }
}
