//! JSON experiment configuration with environment-variable overrides.
//!
//! Every top-level key can be overridden by `ALPHAES_<KEY>` (upper-cased);
//! values are parsed as JSON with a plain-string fallback.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use alphaes::acquisition::AcqOptimizerConfig;
use alphaes::engine::{Method, NoiseMode};
use alphaes::error::Error as CoreError;
use alphaes::oracle::{KdeBandwidth, LandscapeConfig, OracleConfig};

pub const ENV_PREFIX: &str = "ALPHAES_";

/// Noise declaration in configs: `"noiseless"` or `{"noisy": variance}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum NoiseModeConfig {
    Noiseless,
    Noisy(f64),
}

impl NoiseModeConfig {
    pub fn to_engine(&self) -> NoiseMode {
        match self {
            NoiseModeConfig::Noiseless => NoiseMode::Noiseless,
            NoiseModeConfig::Noisy(v) => NoiseMode::Noisy { variance: *v },
        }
    }
}

fn default_reps() -> usize {
    100
}
fn default_budget() -> usize {
    100
}
fn default_n_initial() -> usize {
    25
}
fn default_s() -> usize {
    32
}
fn default_m() -> usize {
    1024
}
fn default_restarts() -> usize {
    1
}
fn default_raw_candidates() -> usize {
    200
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_noise() -> NoiseModeConfig {
    NoiseModeConfig::Noiseless
}
fn default_s_list() -> Vec<usize> {
    vec![1, 8, 32]
}
fn default_oracle_alphas() -> Vec<f64> {
    vec![0.2, 0.5, 0.8]
}

/// Landscape-study overrides; defaults mirror [`LandscapeConfig`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LandscapeSection {
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub noise_variance: f64,
    #[serde(default = "LandscapeSection::default_lengthscale")]
    pub lengthscale: f64,
    #[serde(default = "LandscapeSection::default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "LandscapeSection::default_n_train")]
    pub n_train: usize,
    #[serde(default = "LandscapeSection::default_grid_size")]
    pub grid_size: usize,
    #[serde(default)]
    pub fit_model: bool,
}

impl LandscapeSection {
    fn default_lengthscale() -> f64 {
        2.0
    }
    fn default_amplitude() -> f64 {
        1.0
    }
    fn default_n_train() -> usize {
        8
    }
    fn default_grid_size() -> usize {
        1000
    }
}

impl Default for LandscapeSection {
    fn default() -> Self {
        serde_json::from_value(serde_json::json!({})).expect("defaults are valid")
    }
}

/// Oracle-comparison overrides; defaults mirror [`OracleConfig`] at desk scale.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "OracleSection::default_solution_samples")]
    pub num_solution_samples: usize,
    #[serde(default = "OracleSection::default_draws_per_sample")]
    pub num_function_draws_per_sample: usize,
    #[serde(default = "OracleSection::default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "OracleSection::default_tol_x")]
    pub compatibility_tol_x: f64,
    #[serde(default = "OracleSection::default_tol_y")]
    pub compatibility_tol_y: f64,
    /// Fixed KDE bandwidth; omit for Silverman's rule.
    #[serde(default)]
    pub kde_bandwidth: Option<f64>,
    #[serde(default = "OracleSection::default_quadrature_points")]
    pub quadrature_points: usize,
}

impl OracleSection {
    fn default_solution_samples() -> usize {
        500
    }
    fn default_draws_per_sample() -> usize {
        4
    }
    fn default_grid_size() -> usize {
        200
    }
    fn default_tol_x() -> f64 {
        0.02
    }
    fn default_tol_y() -> f64 {
        0.05
    }
    fn default_quadrature_points() -> usize {
        129
    }

    pub fn to_core(&self) -> OracleConfig {
        OracleConfig {
            num_solution_samples: self.num_solution_samples,
            num_function_draws_per_sample: self.num_function_draws_per_sample,
            compatibility_tol_x: self.compatibility_tol_x,
            compatibility_tol_y: self.compatibility_tol_y,
            kde_bandwidth: match self.kde_bandwidth {
                Some(h) => KdeBandwidth::Fixed(h),
                None => KdeBandwidth::Silverman,
            },
            quadrature_points: self.quadrature_points,
            ..OracleConfig::default()
        }
    }
}

impl Default for OracleSection {
    fn default() -> Self {
        serde_json::from_value(serde_json::json!({})).expect("defaults are valid")
    }
}

/// Top-level experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Objective registry name, e.g. `hartmann3` or `synthetic-gp-4d`.
    #[serde(default)]
    pub objective: Option<String>,
    /// Method labels: `random`, `jes`, `mes`, `ensemble`, `aes:<alpha>`.
    #[serde(default)]
    pub methods: Vec<String>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_n_initial")]
    pub n_initial: usize,
    /// Solution samples per acquisition batch.
    #[serde(default = "default_s")]
    pub s: usize,
    /// RFF features for posterior sampling.
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_noise")]
    pub noise_mode: NoiseModeConfig,
    /// Known-noise mode: pin the fitted noise to the declared variance.
    #[serde(default)]
    pub fix_noise_to_truth: bool,
    /// Acquisition-maximizer restarts.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Raw candidates seeding the acquisition maximizer.
    #[serde(default = "default_raw_candidates")]
    pub raw_candidates: usize,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads for repetition fan-out; 0 picks the machine default.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Redraw the synthetic objective per repetition (paper-style); set to
    /// false to share one draw across repetitions.
    #[serde(default = "ExperimentConfig::default_redraw")]
    pub redraw_objective_per_rep: bool,
    /// Sample-count study values of S.
    #[serde(default = "default_s_list")]
    pub s_list: Vec<usize>,
    /// Divergence orders for the oracle comparison.
    #[serde(default = "default_oracle_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub landscape: LandscapeSection,
    #[serde(default)]
    pub oracle: OracleSection,
}

impl ExperimentConfig {
    fn default_redraw() -> bool {
        true
    }

    /// Loads a config from JSON, applying `ALPHAES_*` environment overrides.
    pub fn load(path: &Path) -> Result<Self, CoreError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CoreError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CoreError::Config(format!("invalid JSON in {}: {e}", path.display())))?;
        apply_env_overrides(&mut value)?;
        let cfg: ExperimentConfig = serde_json::from_value(value)
            .map_err(|e| CoreError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.reps == 0 {
            return Err(CoreError::Config("reps must be >= 1".into()));
        }
        for label in &self.methods {
            Method::parse(label)?;
        }
        if self.s_list.is_empty() {
            return Err(CoreError::Config("s_list must not be empty".into()));
        }
        Ok(())
    }

    pub fn parsed_methods(&self) -> Result<Vec<Method>, CoreError> {
        self.methods.iter().map(|m| Method::parse(m)).collect()
    }

    pub fn acq_optimizer(&self) -> AcqOptimizerConfig {
        AcqOptimizerConfig {
            raw_candidates: self.raw_candidates,
            restarts: self.restarts,
            ..AcqOptimizerConfig::default()
        }
    }

    pub fn landscape_core(&self) -> LandscapeConfig {
        LandscapeConfig {
            n_train: self.landscape.n_train,
            num_solution_samples: self.s,
            grid_size: self.landscape.grid_size,
            num_features: self.m,
            noise_variance: self.landscape.noise_variance,
            lengthscale: self.landscape.lengthscale,
            amplitude: self.landscape.amplitude,
            fit_model: self.landscape.fit_model,
            acq: self.acq_optimizer(),
            ..LandscapeConfig::default()
        }
    }
}

/// Applies `ALPHAES_<KEY>` environment overrides onto the raw JSON object.
fn apply_env_overrides(value: &mut serde_json::Value) -> Result<(), CoreError> {
    let obj = value
        .as_object_mut()
        .ok_or_else(|| CoreError::Config("config root must be a JSON object".into()))?;
    let mut known: Vec<String> = obj.keys().cloned().collect();
    // Also allow overriding defaulted keys absent from the file.
    for key in [
        "objective",
        "methods",
        "reps",
        "budget",
        "n_initial",
        "s",
        "m",
        "noise_mode",
        "fix_noise_to_truth",
        "restarts",
        "raw_candidates",
        "seed",
        "workers",
        "out",
        "redraw_objective_per_rep",
        "s_list",
        "alphas",
    ] {
        if !known.iter().any(|k| k == key) {
            known.push(key.to_string());
        }
    }
    for key in known {
        let env_key = format!("{ENV_PREFIX}{}", key.to_uppercase());
        if let Ok(raw) = std::env::var(&env_key) {
            let parsed = serde_json::from_str(&raw).unwrap_or(serde_json::Value::String(raw));
            obj.insert(key, parsed);
        }
    }
    Ok(())
}
