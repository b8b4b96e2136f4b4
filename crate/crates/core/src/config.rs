//! Configuration document parsing and validation.
//!
//! A run is described by a single JSON object with sections `params`,
//! `squeeze`, `time`, `dfs`, `average_window_periods`, and optionally
//! `sweep` or `dfs_scan`. Unknown keys are rejected. Physics defaults
//! (window sizes, susceptibility step) are materialized into the parsed
//! result so that emitted summaries are self-describing.

use serde::{Deserialize, Serialize};

use crate::dynamics::SqueezeSpec;
use crate::error::{Error, Result};
use crate::measures::MeasuredMode;
use crate::spectrum::OscillatorParams;

pub const DEFAULT_WINDOW_PERIODS: u32 = 50;
pub const DEFAULT_DELTA_T_FACTOR: f64 = 1e-3;

/// Fully resolved single-run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: OscillatorParams,
    #[serde(default = "default_squeeze")]
    pub squeeze: SqueezeSpec,
    /// Explicit time window; when absent it is derived from the spectrum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeSpec>,
    #[serde(default)]
    pub dfs: DfsSpec,
    #[serde(default = "default_window_periods")]
    pub average_window_periods: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dfs_scan: Option<DfsScanSpec>,
}

fn default_squeeze() -> SqueezeSpec {
    SqueezeSpec::vacuum()
}

fn default_window_periods() -> u32 {
    DEFAULT_WINDOW_PERIODS
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_max: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DfsSpec {
    /// Susceptibility step as a fraction of the fastest mode's period.
    pub delta_t_factor: f64,
}

impl Default for DfsSpec {
    fn default() -> Self {
        DfsSpec {
            delta_t_factor: DEFAULT_DELTA_T_FACTOR,
        }
    }
}

/// Parameter axes a sweep may scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamName {
    OmegaA,
    OmegaB,
    LambdaA,
    LambdaB,
    GA,
    GB,
}

impl ParamName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ParamName::OmegaA => "omega_a",
            ParamName::OmegaB => "omega_b",
            ParamName::LambdaA => "lambda_a",
            ParamName::LambdaB => "lambda_b",
            ParamName::GA => "g_a",
            ParamName::GB => "g_b",
        }
    }

    pub fn set(&self, p: &mut OscillatorParams, value: f64) {
        match self {
            ParamName::OmegaA => p.omega_a = value,
            ParamName::OmegaB => p.omega_b = value,
            ParamName::LambdaA => p.lambda_a = value,
            ParamName::LambdaB => p.lambda_b = value,
            ParamName::GA => p.g_a = value,
            ParamName::GB => p.g_b = value,
        }
    }

    pub fn get(&self, p: &OscillatorParams) -> f64 {
        match self {
            ParamName::OmegaA => p.omega_a,
            ParamName::OmegaB => p.omega_b,
            ParamName::LambdaA => p.lambda_a,
            ParamName::LambdaB => p.lambda_b,
            ParamName::GA => p.g_a,
            ParamName::GB => p.g_b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisScale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub param: ParamName,
    pub min: f64,
    pub max: f64,
    pub n_points: usize,
    #[serde(default = "default_scale")]
    pub scale: AxisScale,
}

fn default_scale() -> AxisScale {
    AxisScale::Linear
}

impl AxisSpec {
    pub fn validate(&self, name: &'static str) -> Result<()> {
        if self.n_points < 2 {
            return Err(Error::parameter(name, "n_points must be at least 2"));
        }
        if !(self.min.is_finite() && self.max.is_finite()) || self.min >= self.max {
            return Err(Error::parameter(name, "need finite min < max"));
        }
        if self.scale == AxisScale::Log && self.min <= 0.0 {
            return Err(Error::parameter(name, "log axes need min > 0"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.n_points;
        (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                match self.scale {
                    AxisScale::Linear => self.min + (self.max - self.min) * f,
                    AxisScale::Log => (self.min.ln() + (self.max.ln() - self.min.ln()) * f).exp(),
                }
            })
            .collect()
    }
}

/// Averaged quantities a sweep can tabulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    ENAvg,
    DiscordAvg,
    FidelityAvg,
    ChiFAvg,
}

impl Quantity {
    pub fn column(&self) -> &'static str {
        match self {
            Quantity::ENAvg => "e_n_avg",
            Quantity::DiscordAvg => "discord_avg",
            Quantity::FidelityAvg => "fidelity_avg",
            Quantity::ChiFAvg => "chi_f_avg",
        }
    }
}

/// A parameter tied to a swept axis, `param = factor * follows`, applied per
/// grid point. This is how families like "mediator squeezing proportional to
/// its frequency" are scanned.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TieRule {
    pub param: ParamName,
    pub follows: ParamName,
    pub factor: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis1: AxisSpec,
    pub axis2: AxisSpec,
    pub quantities: Vec<Quantity>,
    #[serde(default)]
    pub tied: Vec<TieRule>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.axis1.validate("sweep.axis1")?;
        self.axis2.validate("sweep.axis2")?;
        if self.axis1.param == self.axis2.param {
            return Err(Error::parameter(
                "sweep.axis2",
                "axis parameters must be distinct",
            ));
        }
        if self.quantities.is_empty() {
            return Err(Error::parameter(
                "sweep.quantities",
                "at least one quantity is required",
            ));
        }
        for tie in &self.tied {
            if tie.param == self.axis1.param || tie.param == self.axis2.param {
                return Err(Error::parameter(
                    "sweep.tied",
                    "a tied parameter cannot also be a sweep axis",
                ));
            }
            if !tie.factor.is_finite() {
                return Err(Error::parameter("sweep.tied", "tie factor must be finite"));
            }
        }
        Ok(())
    }
}

/// One-dimensional susceptibility scan over the mediator frequency.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DfsScanSpec {
    pub min: f64,
    pub max: f64,
    pub n_points: usize,
    /// Mediator squeezing per scan point: `lambda_b = lambda_b_ratio * omega_b`.
    /// `1.0` scans the exact frozen-mediator family. When absent, `lambda_b`
    /// stays at its base value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_b_ratio: Option<f64>,
}

impl DfsScanSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 1 {
            return Err(Error::parameter("dfs_scan.n_points", "must be at least 1"));
        }
        if !(self.min.is_finite() && self.max.is_finite()) || self.min <= 0.0 {
            return Err(Error::parameter(
                "dfs_scan.min",
                "need finite 0 < min <= max",
            ));
        }
        if self.min > self.max {
            return Err(Error::parameter("dfs_scan.max", "need min <= max"));
        }
        if let Some(r) = self.lambda_b_ratio {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::parameter(
                    "dfs_scan.lambda_b_ratio",
                    "must lie in [0, 1]",
                ));
            }
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.n_points == 1 {
            return vec![self.min];
        }
        (0..self.n_points)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (self.n_points - 1) as f64)
            .collect()
    }
}

/// Parses and validates a configuration document.
///
/// Syntax errors carry the line/column location; semantic violations carry
/// the offending field name. Parameter bounds themselves are checked at run
/// time (sweeps deliberately cross the stability boundary point by point).
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("parse error at line {}, column {}: {e}", e.line(), e.column())))?;
    validate_config(&cfg)?;
    Ok(cfg)
}

fn validate_config(cfg: &RunConfig) -> Result<()> {
    cfg.squeeze.validate()?;
    if let Some(t) = &cfg.time {
        if !(t.t_max > 0.0) || !t.t_max.is_finite() {
            return Err(Error::parameter("time.t_max", "must be finite and > 0"));
        }
        if t.n_samples < 2 {
            return Err(Error::parameter("time.n_samples", "must be at least 2"));
        }
    }
    if !(cfg.dfs.delta_t_factor > 0.0) || !cfg.dfs.delta_t_factor.is_finite() {
        return Err(Error::parameter(
            "dfs.delta_t_factor",
            "must be finite and > 0",
        ));
    }
    if cfg.average_window_periods == 0 {
        return Err(Error::parameter(
            "average_window_periods",
            "must be at least 1",
        ));
    }
    if let Some(sweep) = &cfg.sweep {
        sweep.validate()?;
    }
    if let Some(scan) = &cfg.dfs_scan {
        scan.validate()?;
    }
    Ok(())
}

/// Default measured mode for the discord series: the measurement acts on the
/// second terminal oscillator.
pub fn default_measured_mode() -> MeasuredMode {
    MeasuredMode::C
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults_echoed() {
        let cfg = parse_config(
            r#"{"params": {"omega_a": 1.0, "omega_b": 1.0, "lambda_a": 0.0,
                 "lambda_b": 0.0, "g_a": 0.1, "g_b": 0.1}}"#,
        )
        .unwrap();
        assert_eq!(cfg.average_window_periods, DEFAULT_WINDOW_PERIODS);
        assert_eq!(cfg.dfs.delta_t_factor, DEFAULT_DELTA_T_FACTOR);
        assert_eq!(cfg.squeeze, SqueezeSpec::vacuum());
        // the echo is self-describing: defaults appear when re-serialized
        let echo = serde_json::to_string(&cfg).unwrap();
        assert!(echo.contains("average_window_periods"));
        assert!(echo.contains("delta_t_factor"));
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let err = parse_config(
            r#"{"params": {"omega_a": 1.0, "omega_b": 1.0, "lambda_a": 0.0,
                 "lambda_b": 0.0, "g_a": 0.1, "g_b": 0.1}, "tpyo": 3}"#,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("tpyo"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn sweep_section_parses_with_ties() {
        let cfg = parse_config(
            r#"{
              "params": {"omega_a": 5.0, "omega_b": 5.0, "lambda_a": 4.999,
                         "lambda_b": 2.0, "g_a": 1.0, "g_b": 1.4},
              "squeeze": {"r": [0.5, 2.0, 0.5], "theta": [0, 0, 0]},
              "sweep": {
                "axis1": {"param": "omega_b", "min": 1.0, "max": 10.0, "n_points": 20},
                "axis2": {"param": "g_a", "min": 5e-5, "max": 1.5, "n_points": 20, "scale": "log"},
                "quantities": ["e_n_avg"],
                "tied": [{"param": "lambda_b", "follows": "omega_b", "factor": 0.6666666666666666}]
              }
            }"#,
        )
        .unwrap();
        let sweep = cfg.sweep.unwrap();
        assert_eq!(sweep.axis1.param, ParamName::OmegaB);
        assert_eq!(sweep.axis2.scale, AxisScale::Log);
        let vals = sweep.axis2.values();
        assert_eq!(vals.len(), 20);
        assert!(vals[0] > 0.0 && vals[19] <= 1.5 + 1e-12);
        assert_eq!(sweep.tied[0].follows, ParamName::OmegaB);
    }

    #[test]
    fn invalid_axes_are_named() {
        let base = r#"{
          "params": {"omega_a": 1.0, "omega_b": 1.0, "lambda_a": 0.0,
                     "lambda_b": 0.0, "g_a": 0.1, "g_b": 0.1},
          "sweep": {
            "axis1": {"param": "omega_a", "min": 1.0, "max": 2.0, "n_points": 4},
            "axis2": {"param": "omega_a", "min": 0.0, "max": 1.0, "n_points": 4},
            "quantities": ["e_n_avg"]
          }
        }"#;
        let err = parse_config(base).unwrap_err();
        assert!(err.to_string().contains("axis2"), "{err}");
    }

    #[test]
    fn config_roundtrips_through_json() {
        let text = r#"{
          "params": {"omega_a": 1.0, "omega_b": 1.0, "lambda_a": 0.0,
                     "lambda_b": 0.0, "g_a": 0.005, "g_b": 0.005},
          "time": {"t_max": 1000.0, "n_samples": 8192},
          "average_window_periods": 50
        }"#;
        let cfg = parse_config(text).unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        let cfg2 = parse_config(&json).unwrap();
        assert_eq!(cfg2.params, cfg.params);
        assert_eq!(cfg2.time.unwrap().n_samples, 8192);
    }
}
