use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldConfig, LossWeights};
use crate::nn::AdamConfig;
use crate::touchsim::SimConfig;

/// Everything needed to reproduce one mapping run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Scene description; relative paths resolve against the config file.
    pub scene: PathBuf,
    pub steps: u32,
    pub snapshot_every: u32,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub weight_decay: f32,
    pub grad_steps_per_timestep: u32,
    /// Seeds the contact stream, replay sampling and evaluation points.
    pub seed: u64,
    /// Seeds parameter initialization; falls back to `seed`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_seed: Option<u64>,
    /// Snapshots without improvement before stopping; 0 disables.
    pub early_stop_patience: u32,
    pub loss: LossWeights,
    pub field: FieldConfig,
    pub sim: SimConfig,
    pub replay_capacity: usize,
    pub free_space_per_contact: usize,
    /// Nearest free-space offset along the normal (m); the farthest is the truncation.
    pub free_space_min_distance: f64,
    /// Uniform samples over the bounds added to each optimization batch.
    pub volume_samples_per_step: usize,
    pub eval_points: usize,
    pub mesh_resolution: usize,
    /// Write a mesh for every snapshot, not just the final one.
    pub export_snapshot_meshes: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scene: PathBuf::new(),
            steps: 600,
            snapshot_every: 25,
            batch_size: 32,
            learning_rate: 3e-4,
            weight_decay: 1e-5,
            grad_steps_per_timestep: 4,
            seed: 0,
            field_seed: None,
            early_stop_patience: 10,
            loss: LossWeights::default(),
            field: FieldConfig::default(),
            sim: SimConfig::default(),
            replay_capacity: 50_000,
            free_space_per_contact: 2,
            free_space_min_distance: 0.005,
            volume_samples_per_step: 32,
            eval_points: 20_000,
            mesh_resolution: 64,
            export_snapshot_meshes: true,
        }
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Reads a config file, resolving a relative scene path against its
    /// directory. Unlike an in-memory config, a file must name its scene.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if cfg.scene.as_os_str().is_empty() {
            return Err(Error::Config(format!("{}: `scene` path is required", path.display())));
        }
        if cfg.scene.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.scene = dir.join(&cfg.scene);
            }
        }
        Ok(cfg)
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }

    pub fn field_seed(&self) -> u64 {
        self.field_seed.unwrap_or(self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("steps", self.steps as usize),
            ("snapshot_every", self.snapshot_every as usize),
            ("batch_size", self.batch_size),
            ("grad_steps_per_timestep", self.grad_steps_per_timestep as usize),
            ("replay_capacity", self.replay_capacity),
            ("eval_points", self.eval_points),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("`{key}` must be positive")));
            }
        }
        if self.mesh_resolution < crate::eval::MIN_RESOLUTION {
            return Err(Error::Config(format!(
                "`mesh_resolution` must be at least {}",
                crate::eval::MIN_RESOLUTION
            )));
        }
        let trunc = f64::from(self.loss.truncation);
        if !(self.free_space_min_distance > 0.0 && self.free_space_min_distance <= trunc) {
            return Err(Error::Config(format!(
                "`free_space_min_distance` must lie in (0, truncation = {trunc}]"
            )));
        }
        self.adam().validate()?;
        self.loss.validate()?;
        self.field.validate()?;
        self.sim.validate()
    }
}
