use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bias_lab::BiasConfig;
use crate::error::{Error, Result};
use crate::mlp::MAX_HIDDEN;
use crate::objectives::{ObjectiveKind, ObjectiveSpec};

pub const DEFAULT_HIDDEN_SIZES: [usize; 7] = [1, 2, 3, 4, 5, 6, 8];
pub const DEFAULT_BIAS_STRENGTHS: [f64; 2] = [0.0, 0.9];
pub const DEFAULT_LR_GRID: [f64; 7] = [0.3, 0.1, 0.05, 0.03, 0.01, 0.005, 0.003];
pub const DEFAULT_PILOT_SEEDS: usize = 30;

/// The six objectives compared on the scalar scorer, all at β = 1.
/// SimPO and ORPO-align coincide with DPO on raw scores and are left out.
pub fn toy_objectives() -> Vec<ObjectiveSpec> {
    [
        ObjectiveKind::Dpo,
        ObjectiveKind::Ipo,
        ObjectiveKind::AsftAlign,
        ObjectiveKind::Nca,
        ObjectiveKind::CalDpo,
        ObjectiveKind::ApoZero,
    ]
    .into_iter()
    .map(ObjectiveSpec::new)
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub objectives: Vec<ObjectiveSpec>,
    pub hidden_sizes: Vec<usize>,
    pub bias_strengths: Vec<f64>,
    pub lr_grid: Vec<f64>,
    pub n_seeds: usize,
    /// Pilot runs per learning rate during the search.
    pub pilot_seeds: usize,
    pub epochs: usize,
    pub master_seed: u64,
    /// Template for every generated dataset; `bias_strength` and `seed` are
    /// overridden per run.
    pub data: BiasConfig,
    pub out_dir: PathBuf,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            objectives: toy_objectives(),
            hidden_sizes: DEFAULT_HIDDEN_SIZES.to_vec(),
            bias_strengths: DEFAULT_BIAS_STRENGTHS.to_vec(),
            lr_grid: DEFAULT_LR_GRID.to_vec(),
            n_seeds: 1000,
            pilot_seeds: DEFAULT_PILOT_SEEDS,
            epochs: 100,
            master_seed: 0,
            data: BiasConfig::default(),
            out_dir: PathBuf::from("sweep-out"),
        }
    }
}

impl SweepConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SweepConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("invalid sweep config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("sweep config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.objectives.is_empty() {
            return Err(Error::Config("no objectives".into()));
        }
        for (i, o) in self.objectives.iter().enumerate() {
            o.validate()?;
            if !o.kind.is_pair_score_loss() {
                return Err(Error::Config(format!("{} cannot train a scalar scorer", o.kind)));
            }
            if self.objectives[..i].iter().any(|p| p.kind == o.kind) {
                return Err(Error::Config(format!("objective {} listed twice", o.kind)));
            }
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.iter().any(|&h| h == 0 || h > MAX_HIDDEN) {
            return Err(Error::Config(format!(
                "hidden sizes must lie in 1..={MAX_HIDDEN}"
            )));
        }
        if self.bias_strengths.is_empty() || self.bias_strengths.iter().any(|b| !(*b >= 0.0 && b.is_finite()))
        {
            return Err(Error::Config("bias strengths must be finite and >= 0".into()));
        }
        if self.lr_grid.is_empty() || self.lr_grid.iter().any(|lr| !(*lr > 0.0 && lr.is_finite())) {
            return Err(Error::Config("lr grid must be non-empty and positive".into()));
        }
        if self.n_seeds == 0 || self.pilot_seeds == 0 || self.epochs == 0 {
            return Err(Error::Config(
                "n_seeds, pilot_seeds and epochs must be >= 1".into(),
            ));
        }
        self.data.validate()
    }
}
