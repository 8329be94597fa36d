//! Run configuration: model choice plus every tunable constant, with the
//! defaults used throughout the crate. Deserialises from JSON with unknown
//! fields rejected so typos surface as config errors.

use serde::{Deserialize, Serialize};

use crate::ada::HyperParams;
use crate::backtest::TradeConfig;
use crate::error::{Error, Result};
use crate::govi::GoviConfig;

/// Which filter drives the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Bypass,
    AdaBypass,
    Skf,
    Pa1,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bypass" => Ok(ModelKind::Bypass),
            "ada-bypass" => Ok(ModelKind::AdaBypass),
            "skf" => Ok(ModelKind::Skf),
            "pa1" => Ok(ModelKind::Pa1),
            other => Err(Error::config(
                "model",
                format!("unknown model `{other}` (expected bypass, ada-bypass, skf, or pa1)"),
            )),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelKind::Bypass => "bypass",
            ModelKind::AdaBypass => "ada-bypass",
            ModelKind::Skf => "skf",
            ModelKind::Pa1 => "pa1",
        };
        f.write_str(s)
    }
}

/// Sequential-Kalman-filter baseline knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkfConfig {
    /// EWMA factor of the innovation statistics; 1 freezes adaptation.
    pub forgetting: f64,
    /// Floor for the adaptive measurement-noise variance.
    pub r_floor: f64,
    /// Initial measurement-noise variance.
    pub r0: f64,
    /// Initial process-noise variance.
    pub q0: f64,
    /// Initial weight-covariance scale (diagonal).
    pub cov0: f64,
}

impl Default for SkfConfig {
    fn default() -> Self {
        Self {
            forgetting: 0.98,
            r_floor: 1e-8,
            r0: 1.0,
            q0: 1e-4,
            cov0: 1.0,
        }
    }
}

impl SkfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.forgetting > 0.0 && self.forgetting <= 1.0) {
            return Err(Error::config("skf.forgetting", "must lie in (0, 1]"));
        }
        if !(self.r_floor > 0.0 && self.r0 > 0.0) {
            return Err(Error::config("skf.r_floor/r0", "must be positive"));
        }
        if !(self.q0 >= 0.0 && self.cov0 >= 0.0) {
            return Err(Error::config("skf.q0/cov0", "must be nonnegative"));
        }
        Ok(())
    }
}

/// PA-I baseline knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PaConfig {
    /// Aggressiveness cap.
    pub c: f64,
    /// Insensitivity half-width.
    pub epsilon: f64,
}

impl Default for PaConfig {
    fn default() -> Self {
        Self {
            c: 1e-3,
            epsilon: 1.25,
        }
    }
}

impl PaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::config("pa.c", "must be positive and finite"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config("pa.epsilon", "must be nonnegative and finite"));
        }
        Ok(())
    }
}

/// Full run configuration with every default pinned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    pub hyper: HyperParams,
    /// Initial output-precision mean.
    pub beta0: f64,
    pub govi: GoviConfig,
    pub skf: SkfConfig,
    pub pa: PaConfig,
    pub trade: TradeConfig,
    pub horizon: usize,
    pub seed: u64,
    /// Standardise the input series (z-score over present values) before
    /// filtering.
    pub standardize: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::AdaBypass,
            hyper: HyperParams::default(),
            beta0: 500.0,
            govi: GoviConfig::default(),
            skf: SkfConfig::default(),
            pa: PaConfig::default(),
            trade: TradeConfig::default(),
            horizon: 1,
            seed: 0,
            standardize: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        if !(self.beta0 > 0.0 && self.beta0.is_finite()) {
            return Err(Error::config("beta0", "must be positive and finite"));
        }
        self.govi.validate()?;
        self.skf.validate()?;
        self.pa.validate()?;
        self.trade.validate()?;
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        Ok(())
    }

    /// Parse a JSON config, reporting the offending field on failure.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(s).map_err(|e| Error::Config {
            field: "config",
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_constants() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.hyper.c_omega, 1e-3);
        assert_eq!(cfg.hyper.a, 1000.0);
        assert_eq!(cfg.hyper.b, 1.0);
        assert_eq!(cfg.hyper.epsilon, 1.25);
        assert_eq!(cfg.hyper.omega_min, [1e-8; 3]);
        assert_eq!(cfg.beta0, 500.0);
        assert_eq!(cfg.govi.max_fixed_point_iters, 50);
        assert_eq!(cfg.govi.rel_tol, 1e-8);
        assert_eq!(cfg.hyper.a / cfg.hyper.b, 1.0 / cfg.hyper.c_omega);
    }

    #[test]
    fn model_kind_round_trip() {
        for (s, kind) in [
            ("bypass", ModelKind::Bypass),
            ("ada-bypass", ModelKind::AdaBypass),
            ("skf", ModelKind::Skf),
            ("pa1", ModelKind::Pa1),
        ] {
            assert_eq!(s.parse::<ModelKind>().unwrap(), kind);
            assert_eq!(kind.to_string(), s);
        }
        assert!("kalman".parse::<ModelKind>().is_err());
    }

    #[test]
    fn json_partial_override() {
        let cfg = RunConfig::from_json_str(r#"{"model": "skf", "hyper": {"epsilon": 2.0}}"#).unwrap();
        assert_eq!(cfg.model, ModelKind::Skf);
        assert_eq!(cfg.hyper.epsilon, 2.0);
        assert_eq!(cfg.hyper.a, 1000.0);
    }

    #[test]
    fn json_rejects_unknown_field() {
        let err = RunConfig::from_json_str(r#"{"mode": "skf"}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("mode"), "error should name the field: {msg}");
        assert!(!err.is_data_error());
    }

    #[test]
    fn json_rejects_invalid_values() {
        assert!(RunConfig::from_json_str(r#"{"beta0": -5.0}"#).is_err());
        assert!(RunConfig::from_json_str(r#"{"horizon": 0}"#).is_err());
        assert!(RunConfig::from_json_str(r#"{"hyper": {"c_omega": 0.0}}"#).is_err());
    }
}
