//! JSON configuration files. Every file carries `schema_version`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::FitOptions;
use crate::simulator::Condition;

pub const SCHEMA_VERSION: u32 = 1;

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

/// Partial [`FitOptions`]; unset fields keep the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOverrides {
    pub n_starts: Option<usize>,
    pub n_refine: Option<usize>,
    pub burn_in: Option<usize>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub compute_se: Option<bool>,
}

impl FitOverrides {
    pub fn apply(&self, seed: u64) -> FitOptions {
        let d = FitOptions::default();
        FitOptions {
            n_starts: self.n_starts.unwrap_or(d.n_starts),
            n_refine: self.n_refine.unwrap_or(d.n_refine),
            burn_in: self.burn_in.unwrap_or(d.burn_in),
            tolerance: self.tolerance.unwrap_or(d.tolerance),
            max_iterations: self.max_iterations.unwrap_or(d.max_iterations),
            compute_se: self.compute_se.unwrap_or(d.compute_se),
            seed,
            ..d
        }
    }
}

/// Replication study settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default = "StudyConfig::default_reps")]
    pub reps: usize,
    /// Condition selector, see [`super::select_conditions`].
    #[serde(default = "StudyConfig::default_conditions")]
    pub conditions: String,
    /// Worker threads; 0 uses all available cores.
    #[serde(default)]
    pub jobs: usize,
    pub out: PathBuf,
    #[serde(default)]
    pub fit: FitOverrides,
}

impl StudyConfig {
    fn default_reps() -> usize {
        500
    }

    fn default_conditions() -> String {
        "all".into()
    }

    pub fn new(seed: u64, reps: usize, conditions: &str, out: impl Into<PathBuf>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed,
            reps,
            conditions: conditions.into(),
            jobs: 0,
            out: out.into(),
            fit: FitOverrides::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema_version)?;
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        super::select_conditions(&self.conditions)?;
        Ok(())
    }
}

/// A single design cell, as read by `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionFile {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub condition: Condition,
}

/// Model and estimation settings for `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub level1_classes: usize,
    pub level2_classes: usize,
    /// Categories per indicator; inferred from the largest observed code
    /// when absent.
    #[serde(default)]
    pub categories: Option<Vec<usize>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "ModelConfig::default_alpha")]
    pub alpha: f64,
    #[serde(default = "ModelConfig::default_min_site_size")]
    pub min_site_size: usize,
    #[serde(default)]
    pub fit: FitOverrides,
}

impl ModelConfig {
    fn default_alpha() -> f64 {
        0.05
    }

    fn default_min_site_size() -> usize {
        5
    }

    pub fn new(level1_classes: usize, level2_classes: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            level1_classes,
            level2_classes,
            categories: None,
            seed: 0,
            alpha: Self::default_alpha(),
            min_site_size: Self::default_min_site_size(),
            fit: FitOverrides::default(),
        }
    }
}

fn check_schema(version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported schema_version {version} (expected {SCHEMA_VERSION})"
        )));
    }
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_condition_file(path: &Path) -> Result<Condition> {
    let file: ConditionFile = read_json(path)?;
    check_schema(file.schema_version)?;
    file.condition.validate()?;
    Ok(file.condition)
}

pub fn read_model_config(path: &Path) -> Result<ModelConfig> {
    let cfg: ModelConfig = read_json(path)?;
    check_schema(cfg.schema_version)?;
    Ok(cfg)
}

pub fn read_study_config(path: &Path) -> Result<StudyConfig> {
    let cfg: StudyConfig = read_json(path)?;
    cfg.validate()?;
    Ok(cfg)
}
