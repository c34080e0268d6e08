//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use prn_core::predict::Algorithm;
use prn_core::rnn::CellKind;
use prn_core::training::TrainConfig;
use prn_core::trajectory::{NoiseDistribution, TrajectorySpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub name: String,
    pub seed: u64,
    /// Output directory; relative paths are taken from the working directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Starting parameters for `train` and the model for `predict`/`analyze`.
    /// Relative paths are resolved against the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    pub data: DataConfig,
    pub network: NetworkConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predict: Option<PredictConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analyze: Option<AnalyzeConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub trajectories: Vec<TrajectorySpec>,
    /// Training noise amplitude.
    pub a0: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub noise: NoiseDistribution,
    #[serde(default = "default_segments")]
    pub segments_per_trajectory: usize,
    #[serde(default = "default_min_len")]
    pub min_len: usize,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    /// Points per noisy realization of a periodic curve. Parabolas always
    /// cover `0 ≤ t ≤ 1`.
    #[serde(default = "default_sequence_len")]
    pub sequence_len: usize,
    /// Independent noisy realizations per trajectory.
    #[serde(default = "default_realizations")]
    pub realizations: usize,
}

fn default_dt() -> f64 {
    0.01
}
fn default_segments() -> usize {
    6000
}
fn default_min_len() -> usize {
    5
}
fn default_max_len() -> usize {
    50
}
fn default_sequence_len() -> usize {
    50_001
}
fn default_realizations() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub cell: CellKind,
    pub n: usize,
}

/// Training options. The shuffle seed is always derived from the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub validation_fraction: f64,
    pub clip_norm: Option<f64>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let c = TrainConfig::default();
        TrainSection {
            epochs: c.epochs,
            batch_size: c.batch_size,
            learning_rate: c.learning_rate,
            beta1: c.beta1,
            beta2: c.beta2,
            epsilon: c.epsilon,
            validation_fraction: c.validation_fraction,
            clip_norm: c.clip_norm,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, shuffle_seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            validation_fraction: self.validation_fraction,
            shuffle_seed,
            clip_norm: self.clip_norm,
            freeze_cell: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictConfig {
    /// Curves to predict; defaults to the training trajectories.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trajectories: Vec<TrajectorySpec>,
    /// Input noise amplitudes, one run per value.
    pub input_amplitudes: Vec<f64>,
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    pub m: usize,
    pub p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
    /// Grid indices of the first input point, one run per value.
    #[serde(default = "default_starts")]
    pub starts: Vec<usize>,
}

fn default_algorithm() -> Algorithm {
    Algorithm::Mw
}
fn default_starts() -> Vec<usize> {
    vec![0]
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseAnalysis>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scatter: Vec<ScatterConfig>,
}

/// Noise propagation along `m` truth points starting at grid index `start`.
/// The first amplitude gets a full report; all of them enter the residual
/// scaling table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseAnalysis {
    pub trajectory: TrajectorySpec,
    #[serde(default)]
    pub start: usize,
    pub m: usize,
    pub amplitudes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterConfig {
    pub trajectory: TrajectorySpec,
    pub start: usize,
    pub m: usize,
    pub amplitude: f64,
    pub trials: usize,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| config_error(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| config_error(e.to_string()))
    }

    /// Reads, validates, and resolves the checkpoint path against the
    /// config file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => config_error(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let Some(ck) = &cfg.checkpoint {
            let resolved = match path.parent() {
                Some(dir) if ck.is_relative() => dir.join(ck),
                _ => ck.clone(),
            };
            if !resolved.is_file() {
                return Err(config_error(format!("checkpoint {} does not exist", resolved.display())));
            }
            cfg.checkpoint = Some(resolved);
        }
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| CliError::io(path, e))
    }

    /// Input/output dimension shared by every trajectory.
    pub fn dim(&self) -> usize {
        self.data.trajectories.first().map_or(1, TrajectorySpec::dim)
    }

    pub fn predict_trajectories(&self) -> Vec<TrajectorySpec> {
        match &self.predict {
            Some(p) if !p.trajectories.is_empty() => p.trajectories.clone(),
            _ => self.data.trajectories.clone(),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.version != CONFIG_VERSION {
            return Err(config_error(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(config_error("name must be a non-empty file-name-safe string"));
        }
        let d = &self.data;
        if d.trajectories.is_empty() {
            return Err(config_error("data.trajectories is empty"));
        }
        let dim = self.dim();
        for spec in &d.trajectories {
            spec.validate().map_err(|e| config_error(e.to_string()))?;
            if spec.dim() != dim {
                return Err(config_error("all trajectories must share one dimension"));
            }
        }
        if !(d.a0 >= 0.0 && d.a0.is_finite()) {
            return Err(config_error(format!("data.a0 must be non-negative, got {}", d.a0)));
        }
        if !(d.dt > 0.0 && d.dt.is_finite()) {
            return Err(config_error("data.dt must be positive"));
        }
        if d.min_len == 0 || d.min_len > d.max_len {
            return Err(config_error("need 1 ≤ data.min_len ≤ data.max_len"));
        }
        if d.segments_per_trajectory == 0 || d.realizations == 0 {
            return Err(config_error("segment and realization counts must be positive"));
        }
        if self.network.n == 0 {
            return Err(config_error("network.n must be positive"));
        }
        if self.train.epochs > 0 {
            self.train
                .to_train_config(0)
                .validate()
                .map_err(|e| config_error(e.to_string()))?;
        }
        if let Some(p) = &self.predict {
            if p.m == 0 || p.p == 0 {
                return Err(config_error("predict.m and predict.p must be positive"));
            }
            if p.input_amplitudes.is_empty() || p.starts.is_empty() {
                return Err(config_error("predict needs at least one input amplitude and start"));
            }
            check_amplitudes(&p.input_amplitudes)?;
            if let Some(cap) = p.cap {
                if p.m > cap {
                    return Err(config_error("predict.m exceeds predict.cap"));
                }
            }
            for spec in &p.trajectories {
                spec.validate().map_err(|e| config_error(e.to_string()))?;
                if spec.dim() != dim {
                    return Err(config_error("prediction trajectory dimension differs from the network"));
                }
            }
        }
        if let Some(a) = &self.analyze {
            if let Some(n) = &a.noise {
                if n.m == 0 || n.amplitudes.is_empty() {
                    return Err(config_error("analyze.noise needs m ≥ 1 and at least one amplitude"));
                }
                check_amplitudes(&n.amplitudes)?;
                if n.trajectory.dim() != dim {
                    return Err(config_error("analyze.noise trajectory dimension differs from the network"));
                }
            }
            for s in &a.scatter {
                if s.trials < 2 || s.m == 0 {
                    return Err(config_error("analyze.scatter needs trials ≥ 2 and m ≥ 1"));
                }
                check_amplitudes(&[s.amplitude])?;
                if s.trajectory.dim() != dim {
                    return Err(config_error("scatter trajectory dimension differs from the network"));
                }
            }
        }
        Ok(())
    }
}

fn check_amplitudes(values: &[f64]) -> CliResult<()> {
    match values.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
        Some(a) => Err(config_error(format!("amplitudes must be non-negative, got {a}"))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
name = "t"
seed = 3

[data]
trajectories = [{ kind = "sine" }, { kind = "triangle" }]
a0 = 0.15

[network]
cell = "lstm"
n = 20
"#;

    #[test]
    fn defaults_follow_training_recipe() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.data.segments_per_trajectory, 6000);
        assert_eq!((c.data.min_len, c.data.max_len), (5, 50));
        assert_eq!(c.train.epochs, 50);
        assert_eq!(c.train.validation_fraction, 0.2);
        assert_eq!(c.dim(), 1);
    }

    #[test]
    fn round_trips() {
        let mut c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        c.predict = Some(PredictConfig {
            trajectories: vec![TrajectorySpec::Parabola { h: 1.0, b: 4.0 }],
            input_amplitudes: vec![0.0, 0.15],
            algorithm: Algorithm::Ew,
            m: 50,
            p: 21,
            cap: Some(50),
            starts: vec![30],
        });
        c.data.trajectories = vec![TrajectorySpec::Parabola { h: 1.0, b: 2.0 }];
        c.analyze = Some(AnalyzeConfig {
            noise: Some(NoiseAnalysis {
                trajectory: TrajectorySpec::Parabola { h: 1.0, b: 2.0 },
                start: 0,
                m: 40,
                amplitudes: vec![0.2, 0.1],
            }),
            scatter: vec![],
        });
        let text = c.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        let extra = MINIMAL.replace("a0 = 0.15", "a0 = 0.15\nnoise_level = 2");
        assert!(matches!(ExperimentConfig::from_toml(&extra), Err(CliError::Config(_))));
        let v2 = MINIMAL.replace("version = 1", "version = 2");
        assert!(matches!(ExperimentConfig::from_toml(&v2), Err(CliError::Config(_))));
        let neg = MINIMAL.replace("a0 = 0.15", "a0 = -1.0");
        assert!(ExperimentConfig::from_toml(&neg).is_err());
        let mixed = MINIMAL.replace(r#"{ kind = "triangle" }"#, r#"{ kind = "parabola", h = 1.0, b = 2.0 }"#);
        assert!(ExperimentConfig::from_toml(&mixed).is_err());
    }

    #[test]
    fn missing_checkpoint_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, MINIMAL.replace("seed = 3", "seed = 3\ncheckpoint = \"nope.json\"")).unwrap();
        assert!(matches!(ExperimentConfig::load(&path), Err(CliError::Config(_))));
    }
}
