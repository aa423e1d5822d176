//! TOML configuration surface. Every field has a default; unknown keys are
//! rejected so typos fail loudly instead of silently using a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sp2net::bench::ExperimentSpec;
use sp2net::train::TrainConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    /// Hidden-layer widths; the input width (4M+1) and the scalar output are
    /// implied.
    pub hidden_dims: Vec<usize>,
    /// Residual additions between equal-width hidden layers, 1-based.
    pub skip_pairs: Vec<(usize, usize)>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            hidden_dims: vec![256, 512, 1024, 2048, 2048, 2048, 2048],
            skip_pairs: vec![(4, 5), (5, 6), (6, 7)],
        }
    }
}

impl NetworkSection {
    pub fn layer_dims(&self, num_elements: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(4 * num_elements + 1);
        dims.extend(&self.hidden_dims);
        dims.push(1);
        dims
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSection {
    /// Virtual target array size; the training targets emulate this array.
    pub m_target: usize,
}

impl Default for TargetSection {
    fn default() -> Self {
        TargetSection { m_target: 64 }
    }
}

/// Root of the configuration tree shared by the subcommands.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides the per-section seeds when set.
    pub seed: Option<u64>,
    pub num_elements: Option<usize>,
    pub model_path: Option<PathBuf>,
    pub network: NetworkSection,
    pub target: TargetSection,
    pub train: TrainConfig,
    pub experiment: ExperimentSpec,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| format!("invalid config {}: {e}", path.display()))?;
        cfg.apply_seed_override();
        Ok(cfg)
    }

    pub fn apply_seed_override(&mut self) {
        if let Some(seed) = self.seed {
            self.train.seed = seed;
            self.experiment.seed = seed;
        }
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements.unwrap_or(self.experiment.num_elements)
    }
}
