//! TOML config files for the subcommands.
//!
//! One file per invocation. Sections mirror the library modules
//! (`[robot]`, `[sensors]`, `[estimator]`, `[phase]`, `[control]`, `[ga]`)
//! and every section is optional with library defaults filling the gaps.
//! Estimator keys use the published symbol names (`f_HVSE`, `sigma_az`,
//! `c_m1`, ...). Paths inside a config resolve relative to the config
//! file's own directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use hopest::dynamics::{ControlConfig, RobotParams};
use hopest::filter::FilterKind;
use hopest::params::EstimatorParams;
use hopest::phase::PhaseConfig;
use hopest::sensing::SensorConfig;
use hopest::sim::ScheduleSeg;
use hopest::trainer::GaConfig;
use hopest::{Error, Result};

pub fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
}

/// Resolves a possibly-relative path against the directory of `cfg_path`.
pub fn resolve(cfg_path: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        cfg_path.parent().unwrap_or(Path::new(".")).join(p)
    }
}

/// Estimator parameters for a command: the inline `[estimator]` section,
/// unless `params_file` points at a JSON file written by `train`.
pub fn effective_params(
    cfg_path: &Path,
    inline: EstimatorParams,
    params_file: &Option<PathBuf>,
) -> Result<EstimatorParams> {
    let Some(p) = params_file else {
        return Ok(inline);
    };
    let p = resolve(cfg_path, p);
    let text = std::fs::read_to_string(&p)
        .map_err(|e| Error::config(format!("read {}: {e}", p.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", p.display())))
}

fn default_schedule() -> Vec<ScheduleSeg> {
    vec![ScheduleSeg { t: 0.0, h: 1.0 }]
}

fn default_duration() -> f64 {
    10.0
}

fn one() -> usize {
    1
}

/// Config for `simulate`: the closed-loop trial plus artifact options.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub robot: RobotParams,
    #[serde(default)]
    pub estimator: EstimatorParams,
    /// JSON parameter file taking precedence over `[estimator]`.
    #[serde(default)]
    pub params_file: Option<PathBuf>,
    #[serde(default)]
    pub filter: FilterKind,
    #[serde(default)]
    pub sensors: SensorConfig,
    #[serde(default)]
    pub phase: PhaseConfig,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default = "default_schedule")]
    pub schedule: Vec<ScheduleSeg>,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    /// Number of trials to run; trial `i` is seeded `seed + i`.
    #[serde(default = "one")]
    pub trials: usize,
    /// Score flight-phase samples only.
    #[serde(default)]
    pub aerial_only: bool,
}

/// Config for `train`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Recorded trial logs making up the dataset.
    pub logs: Vec<PathBuf>,
    #[serde(default)]
    pub filter: FilterKind,
    #[serde(default)]
    pub robot: RobotParams,
    #[serde(default)]
    pub estimator: EstimatorParams,
    #[serde(default)]
    pub params_file: Option<PathBuf>,
    #[serde(default)]
    pub phase: PhaseConfig,
    #[serde(default)]
    pub ga: GaConfig,
    /// Optional stratified subset drawn before training: `[[height, count]]`.
    #[serde(default)]
    pub per_height: Vec<(f64, usize)>,
    #[serde(default)]
    pub subset_seed: u64,
}

/// Config for `evaluate`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub logs: Vec<PathBuf>,
    #[serde(default)]
    pub filter: FilterKind,
    #[serde(default)]
    pub robot: RobotParams,
    #[serde(default)]
    pub estimator: EstimatorParams,
    #[serde(default)]
    pub params_file: Option<PathBuf>,
    #[serde(default)]
    pub phase: PhaseConfig,
    #[serde(default)]
    pub aerial_only: bool,
    /// Reference estimators to score alongside: any of BA1, DR1, KF3.
    #[serde(default)]
    pub baselines: Vec<String>,
}

pub const DEFAULT_SWEEP_FREQS: [f64; 12] = [
    3360.0, 1680.0, 840.0, 700.0, 600.0, 500.0, 400.0, 300.0, 200.0, 100.0, 50.0, 10.0,
];

fn default_sweep_freqs() -> Vec<f64> {
    DEFAULT_SWEEP_FREQS.to_vec()
}

fn default_h_ch() -> f64 {
    3.0
}

/// Config for `sweep-freq`. The controller always consumes the true state
/// at its own rate, so the sweep isolates the estimator.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Sensing/estimation frequencies to run, Hz.
    pub freqs: Vec<f64>,
    /// Commanded apex height, m.
    pub h_ch: f64,
    pub duration: f64,
    pub seed: u64,
    pub filter: FilterKind,
    pub robot: RobotParams,
    pub estimator: EstimatorParams,
    pub params_file: Option<PathBuf>,
    pub phase: PhaseConfig,
    pub sensors: SensorConfig,
    /// Controller gains and rate; the source field is ignored.
    pub control: ControlConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            freqs: default_sweep_freqs(),
            h_ch: default_h_ch(),
            duration: default_duration(),
            seed: 0,
            filter: FilterKind::default(),
            robot: RobotParams::default(),
            estimator: EstimatorParams::default(),
            params_file: None,
            phase: PhaseConfig::default(),
            sensors: SensorConfig::default(),
            control: ControlConfig::default(),
        }
    }
}

/// Config for `subset`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetConfig {
    pub logs: Vec<PathBuf>,
    /// Hops to draw per commanded height: `[[height, count]]`.
    pub per_height: Vec<(f64, usize)>,
    #[serde(default)]
    pub seed: u64,
}
