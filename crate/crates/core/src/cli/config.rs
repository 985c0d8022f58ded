//! Experiment configuration file (TOML).
//!
//! ```toml
//! grid_n = 4
//! x1 = 0
//! x2 = 1
//! mode = "sampled"            # or "exact"
//! shots_per_setting = 1000000
//! master_seed = 7
//! replications = 100
//! prefactor_convention = "derived"   # or "paper_literal"
//!
//! [state]
//! kind = "uniform"            # "random" (with seed) or "amplitudes" (with values)
//!
//! [imperfections]
//! dark_rate = 0.0
//! ```

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::imperfection::ImperfectionConfig;
use crate::protocol::PrefactorConvention;
use crate::qstate::{GridSpec, PositionWavefunction};

fn default_theta() -> f64 {
    FRAC_PI_2
}

fn default_shots() -> u64 {
    1_000_000
}

fn default_replications() -> usize {
    1
}

fn default_resamples() -> usize {
    crate::sampling::DEFAULT_BOOTSTRAP_RESAMPLES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Uniform,
    Random {
        seed: u64,
    },
    /// `[re, im]` pairs, normalized on load.
    Amplitudes {
        values: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    #[default]
    Exact,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreparationSpec {
    #[default]
    Fixed,
    Redrawn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardErrorSpec {
    #[default]
    DeltaMethod,
    Bootstrap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid_n: usize,
    pub x1: usize,
    pub x2: usize,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub mode: ModeSpec,
    #[serde(default = "default_shots")]
    pub shots_per_setting: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub prefactor_convention: PrefactorConvention,
    #[serde(default)]
    pub preparation: PreparationSpec,
    #[serde(default)]
    pub standard_errors: StandardErrorSpec,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    pub state: StateSpec,
    #[serde(default)]
    pub imperfections: ImperfectionConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid_n: 4,
            x1: 0,
            x2: 1,
            theta: default_theta(),
            mode: ModeSpec::Exact,
            shots_per_setting: default_shots(),
            master_seed: 0,
            replications: default_replications(),
            prefactor_convention: PrefactorConvention::Derived,
            preparation: PreparationSpec::Fixed,
            standard_errors: StandardErrorSpec::DeltaMethod,
            bootstrap_resamples: default_resamples(),
            state: StateSpec::Uniform,
            imperfections: ImperfectionConfig::default(),
        }
    }
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::ConfigInvalid {
        field: field.to_string(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| invalid("<syntax>", e.to_string()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            invalid(&field, e.into_inner().message().trim().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable in TOML")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.grid_n < 2 {
            return Err(invalid(
                "grid_n",
                format!("needs at least 2 grid points, got {}", self.grid_n),
            ));
        }
        if self.x1 == self.x2 {
            return Err(invalid(
                "x1, x2",
                format!("both mark index {}; choose two distinct cells", self.x1),
            ));
        }
        for (name, x) in [("x1", self.x1), ("x2", self.x2)] {
            if x >= self.grid_n {
                return Err(invalid(
                    name,
                    format!("index {x} is outside the grid of {} points", self.grid_n),
                ));
            }
        }
        if !(0.0..=PI).contains(&self.theta) {
            return Err(invalid(
                "theta",
                format!("{} is outside [0, pi]", self.theta),
            ));
        }
        if self.mode == ModeSpec::Sampled && self.shots_per_setting == 0 {
            return Err(invalid(
                "shots_per_setting",
                "must be at least 1 in sampled mode",
            ));
        }
        if self.replications == 0 {
            return Err(invalid("replications", "must be at least 1"));
        }
        if self.standard_errors == StandardErrorSpec::Bootstrap && self.bootstrap_resamples < 2 {
            return Err(invalid("bootstrap_resamples", "needs at least 2 resamples"));
        }
        match &self.state {
            StateSpec::Amplitudes { values } if values.len() != self.grid_n => {
                return Err(invalid(
                    "state.values",
                    format!(
                        "{} amplitudes given for a grid of {} points",
                        values.len(),
                        self.grid_n
                    ),
                ));
            }
            StateSpec::Amplitudes { values }
                if values.iter().all(|[re, im]| *re == 0.0 && *im == 0.0) =>
            {
                return Err(invalid("state.values", "all amplitudes are zero"));
            }
            StateSpec::Amplitudes { values } if values.iter().flatten().any(|v| !v.is_finite()) => {
                return Err(invalid("state.values", "amplitudes must be finite"));
            }
            _ => {}
        }
        self.imperfections
            .validate(self.grid_n)
            .map_err(|e| match e {
                crate::Error::InvalidParameter { name, reason } => {
                    invalid(&format!("imperfections.{name}"), reason)
                }
                crate::Error::WindowTooWide { .. } => {
                    invalid("imperfections.pinhole_halfwidth", e.to_string())
                }
                other => invalid("imperfections", other.to_string()),
            })?;
        let effective = self.imperfections.effective_theta(self.theta);
        if !(0.0..=PI).contains(&effective) {
            return Err(invalid(
                "imperfections.slm_phase_error_delta",
                format!("coupling angle theta + delta/2 = {effective} leaves [0, pi]"),
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.grid_n).expect("validated grid")
    }

    pub fn wavefunction(&self) -> Result<PositionWavefunction, CliError> {
        let grid = self.grid();
        Ok(match &self.state {
            StateSpec::Uniform => PositionWavefunction::uniform(grid),
            StateSpec::Random { seed } => PositionWavefunction::random(grid, *seed),
            StateSpec::Amplitudes { values } => {
                let amps = values
                    .iter()
                    .map(|[re, im]| Complex64::new(*re, *im))
                    .collect();
                PositionWavefunction::normalized(grid, amps)
                    .map_err(|e| invalid("state.values", e.to_string()))?
            }
        })
    }
}
