//! Network configuration: defaults, validation and the flat `key = value` file format.
//!
//! One parameter per line, `#` starts a comment, unknown keys are rejected. Units per key:
//!
//! | key | unit |
//! |-----|------|
//! | `n_f_mean` | expected femtocells per macrocell |
//! | `femtocell_count_mode` | `poisson` or `fixed` |
//! | `n_channels`, `n_macro_users`, `n_femto_users_per_cell`, `gamma` | counts |
//! | `beta_m_db`, `beta_f_db` | dB |
//! | `kappa_m` | linear, > 1 |
//! | `noise_dbm`, `p_femto_const_dbm` | dBm |
//! | `r_macro_m`, `r_femto_m`, `min_distance_m` | meters |
//! | `alpha`, `psi`, `phi` | pathloss exponents |
//! | `epsilon` | SIC residual fraction in [0, 1) |
//! | `seed`, `replicates` | integers |
//!
//! When `p_femto_const_dbm` is not given it is derived from the other values so that a femto user
//! on the cell edge meets `beta_f` over noise alone.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::radio::{db_to_linear, dbm_to_mw};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FemtocellCountMode {
    /// Femtocell count drawn from a Poisson law with mean `n_f_mean`.
    Poisson,
    /// Exactly `round(n_f_mean)` femtocells.
    Fixed,
}

impl fmt::Display for FemtocellCountMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FemtocellCountMode::Poisson => "poisson",
            FemtocellCountMode::Fixed => "fixed",
        })
    }
}

impl FromStr for FemtocellCountMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "poisson" => Ok(Self::Poisson),
            "fixed" => Ok(Self::Fixed),
            other => Err(format!("expected `poisson` or `fixed`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub n_f_mean: f64,
    pub femtocell_count_mode: FemtocellCountMode,
    pub n_channels: usize,
    pub n_macro_users: usize,
    pub n_femto_users_per_cell: usize,
    pub beta_m_db: f64,
    pub beta_f_db: f64,
    pub kappa_m: f64,
    pub noise_dbm: f64,
    pub r_macro_m: f64,
    pub r_femto_m: f64,
    pub alpha: f64,
    pub psi: f64,
    pub phi: f64,
    pub gamma: usize,
    pub epsilon: f64,
    pub p_femto_const_dbm: f64,
    pub min_distance_m: f64,
    pub seed: u64,
    pub replicates: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let mut cfg = Self {
            n_f_mean: 10.0,
            femtocell_count_mode: FemtocellCountMode::Poisson,
            n_channels: 25,
            n_macro_users: 25,
            n_femto_users_per_cell: 5,
            beta_m_db: 20.0,
            beta_f_db: 25.0,
            kappa_m: 2.0,
            noise_dbm: -95.0,
            r_macro_m: 400.0,
            r_femto_m: 30.0,
            alpha: 2.0,
            psi: 3.0,
            phi: 3.5,
            gamma: 5,
            epsilon: 0.0,
            p_femto_const_dbm: 0.0,
            min_distance_m: 1.0,
            seed: 1,
            replicates: 1000,
        };
        cfg.p_femto_const_dbm = cfg.cell_edge_femto_power_dbm();
        cfg
    }
}

const KEYS: &[&str] = &[
    "n_f_mean",
    "femtocell_count_mode",
    "n_channels",
    "n_macro_users",
    "n_femto_users_per_cell",
    "beta_m_db",
    "beta_f_db",
    "kappa_m",
    "noise_dbm",
    "r_macro_m",
    "r_femto_m",
    "alpha",
    "psi",
    "phi",
    "gamma",
    "epsilon",
    "p_femto_const_dbm",
    "min_distance_m",
    "seed",
    "replicates",
];

impl NetworkConfig {
    #[inline]
    pub fn noise_mw(&self) -> f64 {
        dbm_to_mw(self.noise_dbm)
    }

    #[inline]
    pub fn beta_m(&self) -> f64 {
        db_to_linear(self.beta_m_db)
    }

    #[inline]
    pub fn beta_f(&self) -> f64 {
        db_to_linear(self.beta_f_db)
    }

    #[inline]
    pub fn p_femto_const_mw(&self) -> f64 {
        dbm_to_mw(self.p_femto_const_dbm)
    }

    /// Rate of one served macro user, `log2(1 + beta_m)`.
    #[inline]
    pub fn macro_link_rate(&self) -> f64 {
        (1.0 + self.beta_m()).log2()
    }

    #[inline]
    pub fn femto_link_rate(&self) -> f64 {
        (1.0 + self.beta_f()).log2()
    }

    /// Sum rate of the macro-only network, `M log2(1 + beta_m)`.
    #[inline]
    pub fn macro_only_sum_rate(&self) -> f64 {
        self.n_macro_users as f64 * self.macro_link_rate()
    }

    /// Constant femto power at which a user on the femtocell edge just meets `beta_f` over noise.
    pub fn cell_edge_femto_power_dbm(&self) -> f64 {
        self.beta_f_db + self.noise_dbm + 10.0 * self.alpha * self.r_femto_m.log10()
    }

    /// Checks every invariant that holds regardless of which scheme runs, plus `gamma >= F`.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError::Invalid(m));
        if !(self.n_f_mean.is_finite() && self.n_f_mean >= 0.0) {
            return fail(format!(
                "n_f_mean must be finite and >= 0, got {}",
                self.n_f_mean
            ));
        }
        if self.n_macro_users == 0 {
            return fail("n_macro_users must be positive".into());
        }
        if self.n_channels != self.n_macro_users {
            return fail(format!(
                "n_channels ({}) must equal n_macro_users ({})",
                self.n_channels, self.n_macro_users
            ));
        }
        if self.n_femto_users_per_cell > self.n_channels {
            return fail(format!(
                "n_femto_users_per_cell ({}) cannot exceed n_channels ({})",
                self.n_femto_users_per_cell, self.n_channels
            ));
        }
        if self.gamma < self.n_femto_users_per_cell {
            return fail(format!(
                "gamma < F: gamma ({}) must be at least n_femto_users_per_cell ({})",
                self.gamma, self.n_femto_users_per_cell
            ));
        }
        if self.gamma > self.n_channels {
            return fail(format!(
                "gamma ({}) cannot exceed n_channels ({})",
                self.gamma, self.n_channels
            ));
        }
        if !(self.kappa_m > 1.0) {
            return fail(format!(
                "kappa_m must be > 1 (interference budget noise*(kappa_m - 1) would be non-positive), got {}",
                self.kappa_m
            ));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return fail(format!("epsilon must lie in [0, 1), got {}", self.epsilon));
        }
        if !(self.r_macro_m > 0.0 && self.r_femto_m > 0.0) {
            return fail("cell radii must be positive".into());
        }
        if !(self.r_femto_m < self.r_macro_m) {
            return fail(format!(
                "r_femto_m ({}) must be smaller than r_macro_m ({})",
                self.r_femto_m, self.r_macro_m
            ));
        }
        for (name, v) in [("alpha", self.alpha), ("psi", self.psi), ("phi", self.phi)] {
            if !(v >= 2.0 && v.is_finite()) {
                return fail(format!("pathloss exponent {name} must be >= 2, got {v}"));
            }
        }
        if !(self.min_distance_m > 0.0) {
            return fail(format!(
                "min_distance_m must be > 0, got {}",
                self.min_distance_m
            ));
        }
        for (name, v) in [
            ("beta_m_db", self.beta_m_db),
            ("beta_f_db", self.beta_f_db),
            ("noise_dbm", self.noise_dbm),
            ("p_femto_const_dbm", self.p_femto_const_dbm),
        ] {
            if !v.is_finite() {
                return fail(format!("{name} must be finite"));
            }
        }
        if self.replicates == 0 {
            return fail("replicates must be at least 1".into());
        }
        Ok(())
    }

    /// Reads a config file (flat format, or a run manifest) and applies `key=value` overrides.
    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, overrides)
    }

    /// Parses config text on top of the defaults. A JSON run manifest is accepted too: its
    /// `config` object is used as-is.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut values: BTreeMap<String, (usize, String)> = BTreeMap::new();
        if text.trim_start().starts_with('{') {
            for (k, v) in manifest_config_entries(text)? {
                values.insert(k, (0, v));
            }
        } else {
            for (idx, raw) in text.lines().enumerate() {
                let line = idx + 1;
                let content = raw.split('#').next().unwrap_or("").trim();
                if content.is_empty() {
                    continue;
                }
                let (k, v) = split_assignment(content).ok_or_else(|| ConfigError::Parse {
                    line,
                    message: format!("expected `key = value`, got `{content}`"),
                })?;
                values.insert(k, (line, v));
            }
        }
        for (i, ov) in overrides.iter().enumerate() {
            let (k, v) = split_assignment(ov).ok_or_else(|| ConfigError::Parse {
                line: 0,
                message: format!("override #{}: expected `key=value`, got `{ov}`", i + 1),
            })?;
            values.insert(k, (0, v));
        }

        let mut cfg = NetworkConfig::default();
        let mut explicit_power = false;
        for (key, (line, value)) in &values {
            if key == "p_femto_const_dbm" {
                explicit_power = true;
            }
            cfg.set(key, value, *line)?;
        }
        if !explicit_power {
            cfg.p_femto_const_dbm = cfg.cell_edge_femto_power_dbm();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        fn num<T: FromStr>(value: &str, key: &str, line: usize) -> Result<T, ConfigError> {
            value.parse::<T>().map_err(|_| ConfigError::Parse {
                line,
                message: format!("`{key}`: cannot parse `{value}`"),
            })
        }
        match key {
            "n_f_mean" => self.n_f_mean = num(value, key, line)?,
            "femtocell_count_mode" => {
                self.femtocell_count_mode = value
                    .parse()
                    .map_err(|message| ConfigError::Parse { line, message })?
            }
            "n_channels" => self.n_channels = num(value, key, line)?,
            "n_macro_users" => self.n_macro_users = num(value, key, line)?,
            "n_femto_users_per_cell" => self.n_femto_users_per_cell = num(value, key, line)?,
            "beta_m_db" => self.beta_m_db = num(value, key, line)?,
            "beta_f_db" => self.beta_f_db = num(value, key, line)?,
            "kappa_m" => self.kappa_m = num(value, key, line)?,
            "noise_dbm" => self.noise_dbm = num(value, key, line)?,
            "r_macro_m" => self.r_macro_m = num(value, key, line)?,
            "r_femto_m" => self.r_femto_m = num(value, key, line)?,
            "alpha" => self.alpha = num(value, key, line)?,
            "psi" => self.psi = num(value, key, line)?,
            "phi" => self.phi = num(value, key, line)?,
            "gamma" => self.gamma = num(value, key, line)?,
            "epsilon" => self.epsilon = num(value, key, line)?,
            "p_femto_const_dbm" => self.p_femto_const_dbm = num(value, key, line)?,
            "min_distance_m" => self.min_distance_m = num(value, key, line)?,
            "seed" => self.seed = num(value, key, line)?,
            "replicates" => self.replicates = num(value, key, line)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Every key with its value in canonical text form, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        // `{:?}` on f64 prints the shortest representation that parses back to the same bits.
        let f = |v: f64| format!("{v:?}");
        KEYS.iter()
            .map(|&k| {
                let v = match k {
                    "n_f_mean" => f(self.n_f_mean),
                    "femtocell_count_mode" => self.femtocell_count_mode.to_string(),
                    "n_channels" => self.n_channels.to_string(),
                    "n_macro_users" => self.n_macro_users.to_string(),
                    "n_femto_users_per_cell" => self.n_femto_users_per_cell.to_string(),
                    "beta_m_db" => f(self.beta_m_db),
                    "beta_f_db" => f(self.beta_f_db),
                    "kappa_m" => f(self.kappa_m),
                    "noise_dbm" => f(self.noise_dbm),
                    "r_macro_m" => f(self.r_macro_m),
                    "r_femto_m" => f(self.r_femto_m),
                    "alpha" => f(self.alpha),
                    "psi" => f(self.psi),
                    "phi" => f(self.phi),
                    "gamma" => self.gamma.to_string(),
                    "epsilon" => f(self.epsilon),
                    "p_femto_const_dbm" => f(self.p_femto_const_dbm),
                    "min_distance_m" => f(self.min_distance_m),
                    "seed" => self.seed.to_string(),
                    "replicates" => self.replicates.to_string(),
                    _ => unreachable!(),
                };
                (k, v)
            })
            .collect()
    }

    /// Serializes in the flat file format; `parse` of the output yields an identical config.
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}

fn split_assignment(s: &str) -> Option<(String, String)> {
    let (k, v) = s.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || v.is_empty() {
        return None;
    }
    Some((k.to_string(), v.to_string()))
}

fn manifest_config_entries(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let parse_err = |message: String| ConfigError::Parse { line: 0, message };
    let doc: serde_json::Value =
        serde_json::from_str(text).map_err(|e| parse_err(format!("manifest: {e}")))?;
    let obj = doc
        .get("config")
        .and_then(|c| c.as_object())
        .ok_or_else(|| parse_err("manifest has no `config` object".into()))?;
    obj.iter()
        .map(|(k, v)| {
            let s = match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            Ok((k.clone(), s))
        })
        .collect()
}
