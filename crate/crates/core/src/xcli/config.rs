use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::EnsembleKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Randomize,
    Pqc,
    Hide,
    Lock,
    Uncertainty,
    Bounds,
    Net,
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

/// Scalar parameters shared by all commands; each command reads the keys
/// it needs and rejects a missing required one by name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<EnsembleKind>,
}

impl Parameters {
    /// Values present in `over` replace those in `self`.
    pub fn overlay(self, over: Parameters) -> Parameters {
        Parameters {
            d: over.d.or(self.d),
            n: over.n.or(self.n),
            p: over.p.or(self.p),
            epsilon: over.epsilon.or(self.epsilon),
            trials: over.trials.or(self.trials),
            restarts: over.restarts.or(self.restarts),
            iterations: over.iterations.or(self.iterations),
            states: over.states.or(self.states),
            draws: over.draws.or(self.draws),
            seed: over.seed.or(self.seed),
            kind: over.kind.or(self.kind),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub parameters: Parameters,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// On-disk config; every field may be overridden from the command line.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub command: Option<Command>,
    #[serde(default)]
    pub parameters: Parameters,
    pub output: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

impl ExperimentConfig {
    /// Merges an optional file with command-line values, the latter winning.
    pub fn resolve(
        file: Option<ConfigFile>,
        command: Option<Command>,
        flags: Parameters,
        output: Option<PathBuf>,
    ) -> Result<Self> {
        let file = file.unwrap_or_default();
        let command = command
            .or(file.command)
            .ok_or_else(|| Error::Config("no command given".into()))?;
        Ok(Self {
            command,
            parameters: file.parameters.overlay(flags),
            output: output.or(file.output),
        })
    }
}

pub(crate) fn required(value: Option<usize>, key: &str, command: Command) -> Result<usize> {
    let v = value.ok_or_else(|| Error::Config(format!("`{command}` requires `{key}`")))?;
    positive(v, key)
}

pub(crate) fn positive(value: usize, key: &str) -> Result<usize> {
    if value == 0 {
        return Err(Error::Config(format!("`{key}` must be a positive integer")));
    }
    Ok(value)
}

pub(crate) fn or_default(value: Option<usize>, key: &str, default: usize) -> Result<usize> {
    positive(value.unwrap_or(default), key)
}

pub(crate) fn unit_interval(value: f64, key: &str) -> Result<f64> {
    if !(value > 0.0 && value <= 1.0) {
        return Err(Error::Config(format!("`{key}` must lie in (0, 1], got {value}")));
    }
    Ok(value)
}
