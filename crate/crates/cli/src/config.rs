//! Textual experiment specification and its translation into an ensemble
//! config. Unknown keys are rejected outright, and every validation error
//! names the offending key so a typo in a long config file is a one-line fix.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use rapidmeas::{
    EnsembleConfig, Error, FeedbackPolicy, MeasurementModel, Method, OrderingKind, StepParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub system: SystemSection,
    pub strength: f64,
    pub feedback: FeedbackSection,
    pub integrator: IntegratorSection,
    pub ensemble: EnsembleSection,
    pub outputs: OutputsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubits: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackSection {
    pub policy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub method: String,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub trajectories: usize,
    pub master_seed: u64,
    pub t_max: f64,
    pub sample_interval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    pub epsilons: Vec<f64>,
    pub directory: String,
}

/// Reads a spec from TOML, or from JSON when the file extension is .json.
/// A JSON file with a top-level "config" object (the shape run.json echoes)
/// is unwrapped, so a previous run's provenance file can be replayed as-is.
pub fn load_spec(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let spec = if is_json {
        let value: serde_json::Value = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse {} as JSON", path.display()))?;
        let inner = match value.get("config") {
            Some(config) => config.clone(),
            None => value,
        };
        serde_json::from_value(inner)
            .with_context(|| format!("invalid experiment spec in {}", path.display()))?
    } else {
        toml::from_str(&text)
            .with_context(|| format!("invalid experiment spec in {}", path.display()))?
    };
    Ok(spec)
}

impl ExperimentSpec {
    /// Translates the textual spec into a validated EnsembleConfig.
    pub fn to_ensemble_config(&self) -> Result<EnsembleConfig> {
        let model = self.model()?;
        let policy = self.policy()?;

        let method = match self.integrator.method.as_str() {
            "exact" => Method::Exact,
            "euler" => Method::Euler,
            other => bail!("integrator.method must be \"exact\" or \"euler\", got \"{other}\""),
        };
        let params = StepParams::new(self.integrator.dt, method)
            .map_err(|_| anyhow!("integrator.dt must be positive and finite, got {}", self.integrator.dt))?;

        if self.ensemble.trajectories == 0 {
            bail!("ensemble.trajectories must be at least 1");
        }

        let config = EnsembleConfig {
            model,
            policy,
            params,
            trajectories: self.ensemble.trajectories,
            master_seed: self.ensemble.master_seed,
            t_max: self.ensemble.t_max,
            epsilons: self.outputs.epsilons.clone(),
            sample_interval: self.ensemble.sample_interval,
        };
        config.validate().map_err(name_config_error)?;
        Ok(config)
    }

    fn model(&self) -> Result<MeasurementModel> {
        match self.system.kind.as_str() {
            "qudit" => {
                if self.system.qubits.is_some() {
                    bail!("system.qubits conflicts with system.type = \"qudit\"");
                }
                let dim = self
                    .system
                    .dim
                    .ok_or_else(|| anyhow!("system.dim is required when system.type = \"qudit\""))?;
                MeasurementModel::qudit(dim, self.strength).map_err(|e| match e {
                    Error::InvalidDimension { dim } => {
                        anyhow!("system.dim must be at least 2, got {dim}")
                    }
                    Error::NonPositive { value, .. } => {
                        anyhow!("strength must be positive and finite, got {value}")
                    }
                    other => anyhow!(other),
                })
            }
            "register" => {
                if self.system.dim.is_some() {
                    bail!("system.dim conflicts with system.type = \"register\"");
                }
                let qubits = self.system.qubits.ok_or_else(|| {
                    anyhow!("system.qubits is required when system.type = \"register\"")
                })?;
                MeasurementModel::register(qubits, self.strength).map_err(|e| match e {
                    Error::InvalidQubitCount { qubits, max } => {
                        anyhow!("system.qubits must lie in 1..={max}, got {qubits}")
                    }
                    Error::NonPositive { value, .. } => {
                        anyhow!("strength must be positive and finite, got {value}")
                    }
                    other => anyhow!(other),
                })
            }
            other => bail!("system.type must be \"qudit\" or \"register\", got \"{other}\""),
        }
    }

    fn policy(&self) -> Result<FeedbackPolicy> {
        let reject_ordering_keys = |policy: &str| -> Result<()> {
            if self.feedback.interval.is_some() {
                bail!("feedback.interval only applies to policy \"periodic\", not \"{policy}\"");
            }
            if self.feedback.inner.is_some() {
                bail!("feedback.inner only applies to policy \"periodic\", not \"{policy}\"");
            }
            Ok(())
        };
        match self.feedback.policy.as_str() {
            "none" => {
                reject_ordering_keys("none")?;
                Ok(FeedbackPolicy::None)
            }
            "l_order" => {
                reject_ordering_keys("l_order")?;
                Ok(FeedbackPolicy::LOrder)
            }
            "h_order" => {
                reject_ordering_keys("h_order")?;
                Ok(FeedbackPolicy::HOrder)
            }
            "periodic" => {
                let interval = self.feedback.interval.ok_or_else(|| {
                    anyhow!("feedback.interval is required for policy \"periodic\"")
                })?;
                let inner = match self.feedback.inner.as_deref() {
                    Some("l_order") => OrderingKind::LOrder,
                    Some("h_order") => OrderingKind::HOrder,
                    Some(other) => {
                        bail!("feedback.inner must be \"l_order\" or \"h_order\", got \"{other}\"")
                    }
                    None => bail!("feedback.inner is required for policy \"periodic\""),
                };
                Ok(FeedbackPolicy::Periodic { interval, inner })
            }
            other => bail!(
                "feedback.policy must be one of none|l_order|h_order|periodic, got \"{other}\""
            ),
        }
    }
}

/// Maps core validation errors onto the config keys that caused them.
fn name_config_error(e: Error) -> anyhow::Error {
    match e {
        Error::NonPositive { name: "t_max", value } => {
            anyhow!("ensemble.t_max must be positive, got {value}")
        }
        Error::NonPositive { name: "interval", value } => {
            anyhow!("feedback.interval must be positive, got {value}")
        }
        Error::NonPositive { name: "sample_interval", value } => {
            anyhow!("ensemble.sample_interval must be positive, got {value}")
        }
        Error::SampleIntervalBelowDt { sample_interval, dt } => anyhow!(
            "ensemble.sample_interval ({sample_interval}) must not be finer than integrator.dt ({dt})"
        ),
        Error::EpsilonsNotDescending => {
            anyhow!("outputs.epsilons must be strictly decreasing")
        }
        Error::EpsilonOutOfRange { value } => {
            anyhow!("outputs.epsilons entries must lie in (0, 1), got {value}")
        }
        Error::ExpectedQudit => {
            anyhow!("feedback.policy \"l_order\" requires system.type = \"qudit\"")
        }
        Error::ExpectedRegister => {
            anyhow!("feedback.policy \"h_order\" requires system.type = \"register\"")
        }
        Error::NoTrajectories => anyhow!("ensemble.trajectories must be at least 1"),
        other => anyhow!(other),
    }
}
