use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// UV cutoff profile `χ`, evaluated at `k / Λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiProfile {
    /// Indicator of the cube `[-1, 1]^d`.
    Indicator,
    /// `(1 + cos(π min(|x|, 1))) / 2`.
    CosineBump,
    /// `exp(-|x|^2)`; not compactly supported, hence rejected wherever an
    /// admissible cutoff is required.
    Gaussian,
}

impl ChiProfile {
    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            ChiProfile::Indicator => {
                if x.iter().all(|v| v.abs() <= 1.0) {
                    1.0
                } else {
                    0.0
                }
            }
            ChiProfile::CosineBump => {
                let r = norm(x).min(1.0);
                0.5 * (1.0 + (std::f64::consts::PI * r).cos())
            }
            ChiProfile::Gaussian => (-x.iter().map(|v| v * v).sum::<f64>()).exp(),
        }
    }

    /// Real, valued in `[0, 1]`, continuous at 0 with `χ(0) = 1`, compact support.
    pub fn is_admissible(self) -> bool {
        !matches!(self, ChiProfile::Gaussian)
    }

    pub fn name(self) -> &'static str {
        match self {
            ChiProfile::Indicator => "indicator",
            ChiProfile::CosineBump => "cosine_bump",
            ChiProfile::Gaussian => "gaussian",
        }
    }
}

impl std::str::FromStr for ChiProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "indicator" => Ok(ChiProfile::Indicator),
            "cosine_bump" => Ok(ChiProfile::CosineBump),
            "gaussian" => Ok(ChiProfile::Gaussian),
            other => Err(Error::config("chi_choice", format!("unknown profile `{other}`"))),
        }
    }
}

/// Spatial cutoff profile `g`, evaluated at `k ± q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GProfile {
    /// Indicator of the open unit ball.
    UnitBall,
}

impl GProfile {
    pub fn eval(self, v: &[f64]) -> f64 {
        match self {
            GProfile::UnitBall => {
                if norm(v) < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Model parameters. Field names double as JSON keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub d: usize,
    pub m_b: f64,
    pub m_f: f64,
    pub p: f64,
    pub grid_spacing: f64,
    pub grid_halfwidth: f64,
    /// Use the shifted lattice `h (Z + 1/2)^d`, which is symmetric with an even
    /// number of points per axis.
    pub grid_staggered: bool,
    /// Total boson number cap; `None` means twice the experiment order.
    pub boson_max: Option<usize>,
    pub h1: f64,
    pub h2: f64,
    pub g_choice: GProfile,
    pub chi_choice: ChiProfile,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    /// Spectral parameter as `[re, im]`.
    pub z: Complex64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d: 1,
            m_b: 1.0,
            m_f: 1.5,
            p: 0.6,
            grid_spacing: 0.8,
            grid_halfwidth: 0.8,
            grid_staggered: true,
            boson_max: None,
            h1: 1.0,
            h2: 1.0,
            g_choice: GProfile::UnitBall,
            chi_choice: ChiProfile::Indicator,
            lambda: 1.0,
            z: Complex64::new(-1.0, 0.0),
        }
    }
}

/// Boson cap used when the configuration leaves it open and no order is known.
pub const DEFAULT_ORDER: usize = 2;

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(Error::config("d", "spatial dimension must be 1, 2 or 3"));
        }
        for (name, v) in [("m_b", self.m_b), ("m_f", self.m_f)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, "masses must be strictly positive"));
            }
        }
        if !self.p.is_finite() {
            return Err(Error::config("p", "exponent must be finite"));
        }
        if !(self.grid_spacing.is_finite() && self.grid_spacing > 0.0) {
            return Err(Error::config("grid_spacing", "must be > 0"));
        }
        if !(self.grid_halfwidth.is_finite() && self.grid_halfwidth > 0.0) {
            return Err(Error::config("grid_halfwidth", "must be > 0"));
        }
        if self.grid_staggered && self.grid_halfwidth < 0.5 * self.grid_spacing {
            return Err(Error::config(
                "grid_halfwidth",
                "staggered grid needs halfwidth >= spacing / 2",
            ));
        }
        if self.boson_max == Some(0) {
            return Err(Error::config("boson_max", "must be >= 1"));
        }
        for (name, v) in [("h1", self.h1), ("h2", self.h2)] {
            if !v.is_finite() {
                return Err(Error::config(name, "coupling must be finite"));
            }
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::config("Lambda", "cutoff must be > 0"));
        }
        if !(self.z.re.is_finite() && self.z.im.is_finite()) {
            return Err(Error::config("z", "must be finite"));
        }
        if self.z.re > 0.0 {
            return Err(Error::config("z", "spectral parameter needs Re z <= 0"));
        }
        if self.p <= self.d as f64 / 2.0 - 1.0 {
            log::warn!(
                "p = {} is at or below d/2 - 1 = {}; renormalized limit not expected",
                self.p,
                self.d as f64 / 2.0 - 1.0
            );
        }
        Ok(())
    }

    pub fn boson_cap(&self) -> usize {
        self.boson_max.unwrap_or(2 * DEFAULT_ORDER)
    }

    /// Fills an open boson cap with `2 * order`.
    pub fn with_order_default(&self, order: usize) -> Self {
        let mut out = self.clone();
        if out.boson_max.is_none() {
            out.boson_max = Some((2 * order).max(1));
        }
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ModelConfig = serde_json::from_str(text).map_err(|e| Error::Config {
            field: format!("line {} column {}", e.line(), e.column()),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}
