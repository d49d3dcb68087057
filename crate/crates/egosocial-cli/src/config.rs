//! TOML run configuration.
//!
//! Every section and every field is optional; anything absent falls back to
//! the library defaults, and command-line flags override whatever the file
//! says. Unknown keys are rejected so typos fail loudly instead of being
//! silently ignored.

use egosocial_core::dataset::{AugmentSpec, SplitSpec, SyntheticSpec};
use egosocial_core::lstm::LstmConfig;
use egosocial_core::search::SearchSpace;
use egosocial_core::training::TrainConfig;
use egosocial_core::{Error, Result};
use serde::Deserialize;

use crate::formats::parse_optimizer;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub synthetic: SyntheticSection,
    #[serde(default)]
    pub augment: AugmentSection,
    #[serde(default)]
    pub baseline: BaselineSection,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub num_blocks: Option<usize>,
    pub cells_per_block: Option<usize>,
    pub alpha: Option<f64>,
    pub init_range: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub optimizer: Option<String>,
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    pub lbfgs_memory: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub trials: Option<u64>,
    pub workers: Option<usize>,
    pub num_blocks: Option<[usize; 2]>,
    pub learning_rate: Option<[f64; 2]>,
    pub momentum: Option<[f64; 2]>,
    pub batch_size: Option<[usize; 2]>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    pub train_fraction: Option<f64>,
    pub val_fraction: Option<f64>,
    pub test_fraction: Option<f64>,
    pub balanced: Option<bool>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub num_positive: Option<usize>,
    pub num_negative: Option<usize>,
    pub length_range: Option<[usize; 2]>,
    pub glance_probability: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentSection {
    pub copies_per_series: Option<usize>,
    pub length_range: Option<[usize; 2]>,
    pub positive_distance_range_cm: Option<[f64; 2]>,
    pub positive_orientation_range_deg: Option<[f64; 2]>,
    pub injection_fraction: Option<f64>,
    pub bias_fraction: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    /// Explicit threshold grid; wins over `grid_steps` when both are set.
    pub thresholds: Option<Vec<f64>>,
    /// Evenly spaced grid 0..=1 with this many steps (so `grid_steps = 20`
    /// sweeps 0.00, 0.05, ..., 1.00).
    pub grid_steps: Option<usize>,
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_pair<T: Copy>(slot: &mut (T, T), value: Option<[T; 2]>) {
    if let Some([lo, hi]) = value {
        *slot = (lo, hi);
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("bad config file: {e}")))
    }

    /// Model architecture with the file's overrides applied to defaults.
    pub fn lstm_config(&self) -> LstmConfig {
        let mut cfg = LstmConfig::default();
        set(&mut cfg.num_blocks, self.model.num_blocks);
        set(&mut cfg.cells_per_block, self.model.cells_per_block);
        set(&mut cfg.alpha, self.model.alpha);
        set(&mut cfg.init_range, self.model.init_range);
        set(&mut cfg.seed, self.model.seed);
        cfg
    }

    /// Training hyperparameters with the file's overrides applied.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::default();
        if let Some(name) = &self.train.optimizer {
            cfg.optimizer = parse_optimizer(name)?;
        }
        set(&mut cfg.learning_rate, self.train.learning_rate);
        set(&mut cfg.momentum, self.train.momentum);
        set(&mut cfg.batch_size, self.train.batch_size);
        set(&mut cfg.max_epochs, self.train.max_epochs);
        set(&mut cfg.patience, self.train.patience);
        set(&mut cfg.lbfgs_memory, self.train.lbfgs_memory);
        set(&mut cfg.seed, self.train.seed);
        Ok(cfg)
    }

    /// Hyperparameter-search ranges with the file's overrides applied.
    pub fn search_space(&self) -> SearchSpace {
        let mut space = SearchSpace::default();
        set_pair(&mut space.num_blocks, self.search.num_blocks);
        set_pair(&mut space.learning_rate, self.search.learning_rate);
        set_pair(&mut space.momentum, self.search.momentum);
        set_pair(&mut space.batch_size, self.search.batch_size);
        space
    }

    pub fn split_spec(&self) -> SplitSpec {
        let mut spec = SplitSpec::default();
        set(&mut spec.train_fraction, self.split.train_fraction);
        set(&mut spec.val_fraction, self.split.val_fraction);
        set(&mut spec.test_fraction, self.split.test_fraction);
        set(&mut spec.balanced, self.split.balanced);
        set(&mut spec.seed, self.split.seed);
        spec
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        let mut spec = SyntheticSpec::default();
        set(&mut spec.num_positive, self.synthetic.num_positive);
        set(&mut spec.num_negative, self.synthetic.num_negative);
        set_pair(&mut spec.length_range, self.synthetic.length_range);
        set(
            &mut spec.glance_probability,
            self.synthetic.glance_probability,
        );
        set(&mut spec.seed, self.synthetic.seed);
        spec
    }

    pub fn augment_spec(&self) -> AugmentSpec {
        let mut spec = AugmentSpec::default();
        set(&mut spec.copies_per_series, self.augment.copies_per_series);
        set_pair(&mut spec.length_range, self.augment.length_range);
        set_pair(
            &mut spec.positive_distance_range_cm,
            self.augment.positive_distance_range_cm,
        );
        set_pair(
            &mut spec.positive_orientation_range_deg,
            self.augment.positive_orientation_range_deg,
        );
        set(
            &mut spec.injection_fraction,
            self.augment.injection_fraction,
        );
        set(&mut spec.bias_fraction, self.augment.bias_fraction);
        set(&mut spec.seed, self.augment.seed);
        spec
    }

    /// The baseline threshold grid: explicit list, else an even grid over
    /// `[0, 1]`, else the default 0.00..=1.00 in steps of 0.05.
    pub fn baseline_grid(&self) -> Result<Vec<f64>> {
        if let Some(explicit) = &self.baseline.thresholds {
            if explicit.is_empty() {
                return Err(Error::InvalidArgument(String::from(
                    "baseline.thresholds must not be empty",
                )));
            }
            return Ok(explicit.clone());
        }
        let steps = self.baseline.grid_steps.unwrap_or(20);
        if steps == 0 {
            return Err(Error::InvalidArgument(String::from(
                "baseline.grid_steps must be positive",
            )));
        }
        Ok((0..=steps).map(|i| i as f64 / steps as f64).collect())
    }
}
