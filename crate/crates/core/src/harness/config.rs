use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::environment::NoiseKind;
use crate::error::{Error, Result};
use crate::estimator::RadiusMode;
use crate::policies::PolicyKind;

use super::output::Format;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaMode {
    /// A fresh θ* on the sphere of radius S for every trial.
    ResamplePerTrial,
    /// One θ* (derived from the seed) shared by all trials.
    Fixed,
}

impl FromStr for ThetaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "resample-per-trial" | "resample" => Ok(ThetaMode::ResamplePerTrial),
            "fixed" => Ok(ThetaMode::Fixed),
            other => Err(Error::usage(format!(
                "theta-mode: unknown value '{other}' (expected resample-per-trial or fixed)"
            ))),
        }
    }
}

/// Full description of a Monte Carlo experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub rounds: usize,
    pub trials: usize,
    pub policies: Vec<PolicyKind>,
    pub sigma: f64,
    pub kappa: f64,
    pub theta_norm: f64,
    pub theta_mode: ThetaMode,
    pub seed: u64,
    pub record_every: usize,
    pub beta_literal: bool,
    pub shared_noise: bool,
    pub noise: NoiseKind,
    /// Confidence level used by the OFU radius and the bound overlays.
    pub delta: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dim: 5,
            rounds: 3000,
            trials: 1000,
            policies: vec![PolicyKind::Ofu, PolicyKind::OrthBatch],
            sigma: 1.0,
            kappa: 1.0,
            theta_norm: 1.0,
            theta_mode: ThetaMode::ResamplePerTrial,
            seed: 1,
            record_every: 10,
            beta_literal: false,
            shared_noise: false,
            noise: NoiseKind::Gaussian,
            delta: 0.1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        fn bad(field: &str, msg: impl std::fmt::Display) -> Error {
            Error::usage(format!("{field}: {msg}"))
        }
        if self.dim == 0 {
            return Err(bad("dim", "must be >= 1"));
        }
        if self.rounds == 0 {
            return Err(bad("rounds", "must be >= 1"));
        }
        if self.trials == 0 {
            return Err(bad("trials", "must be >= 1"));
        }
        if self.policies.is_empty() {
            return Err(bad("policies", "at least one policy is required"));
        }
        let mut seen = self.policies.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.policies.len() {
            return Err(bad("policies", "a policy is listed twice"));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(bad(
                "sigma",
                format!("must be finite and >= 0, got {}", self.sigma),
            ));
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(bad(
                "kappa",
                format!("must be finite and > 0, got {}", self.kappa),
            ));
        }
        if !(self.theta_norm > 0.0) || !self.theta_norm.is_finite() {
            return Err(bad(
                "theta-norm",
                format!("must be finite and > 0, got {}", self.theta_norm),
            ));
        }
        if self.record_every == 0 {
            return Err(bad("record-every", "must be >= 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(bad(
                "delta",
                format!("must lie in (0, 1), got {}", self.delta),
            ));
        }
        Ok(())
    }

    /// Rounds at which curves are recorded: `1..=d`, every multiple of
    /// `record_every`, and the final round.
    pub fn recording_grid(&self) -> Vec<usize> {
        let mut grid: Vec<usize> = (1..=self.dim.min(self.rounds)).collect();
        grid.extend((1..=self.rounds / self.record_every).map(|k| k * self.record_every));
        grid.push(self.rounds);
        grid.sort_unstable();
        grid.dedup();
        grid
    }

    pub fn radius_mode(&self) -> RadiusMode {
        if self.beta_literal {
            RadiusMode::Literal
        } else {
            RadiusMode::SelfNormalized
        }
    }
}

/// Optional values for every experiment setting, as read from a config file
/// or from command-line flags. Later layers override earlier ones.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConfigOverrides {
    #[serde(alias = "d")]
    pub dim: Option<usize>,
    #[serde(alias = "T")]
    pub rounds: Option<usize>,
    pub trials: Option<usize>,
    pub policies: Option<Vec<PolicyKind>>,
    pub sigma: Option<f64>,
    pub kappa: Option<f64>,
    pub theta_norm: Option<f64>,
    pub theta_mode: Option<ThetaMode>,
    pub seed: Option<u64>,
    pub record_every: Option<usize>,
    pub beta_literal: Option<bool>,
    pub shared_noise: Option<bool>,
    pub noise: Option<NoiseKind>,
    pub delta: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl ConfigOverrides {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// `self` with every field that `top` sets replaced by `top`'s value.
    pub fn overlay(self, top: ConfigOverrides) -> ConfigOverrides {
        ConfigOverrides {
            dim: top.dim.or(self.dim),
            rounds: top.rounds.or(self.rounds),
            trials: top.trials.or(self.trials),
            policies: top.policies.or(self.policies),
            sigma: top.sigma.or(self.sigma),
            kappa: top.kappa.or(self.kappa),
            theta_norm: top.theta_norm.or(self.theta_norm),
            theta_mode: top.theta_mode.or(self.theta_mode),
            seed: top.seed.or(self.seed),
            record_every: top.record_every.or(self.record_every),
            beta_literal: top.beta_literal.or(self.beta_literal),
            shared_noise: top.shared_noise.or(self.shared_noise),
            noise: top.noise.or(self.noise),
            delta: top.delta.or(self.delta),
            out: top.out.or(self.out),
            format: top.format.or(self.format),
        }
    }

    pub fn apply(&self, base: ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig {
            dim: self.dim.unwrap_or(base.dim),
            rounds: self.rounds.unwrap_or(base.rounds),
            trials: self.trials.unwrap_or(base.trials),
            policies: self.policies.clone().unwrap_or(base.policies),
            sigma: self.sigma.unwrap_or(base.sigma),
            kappa: self.kappa.unwrap_or(base.kappa),
            theta_norm: self.theta_norm.unwrap_or(base.theta_norm),
            theta_mode: self.theta_mode.unwrap_or(base.theta_mode),
            seed: self.seed.unwrap_or(base.seed),
            record_every: self.record_every.unwrap_or(base.record_every),
            beta_literal: self.beta_literal.unwrap_or(base.beta_literal),
            shared_noise: self.shared_noise.unwrap_or(base.shared_noise),
            noise: self.noise.unwrap_or(base.noise),
            delta: self.delta.unwrap_or(base.delta),
        }
    }
}

/// Parses a comma-separated policy list such as `ofu,orth-batch`.
pub fn parse_policies(s: &str) -> Result<Vec<PolicyKind>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect()
}
