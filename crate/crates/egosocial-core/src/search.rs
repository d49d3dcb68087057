//! Random hyperparameter search: log-uniform sampling over four ranges
//! (memory blocks, learning rate, momentum, batch size), one full training
//! run per trial, results ranked by validation loss.
//!
//! Every trial derives its own generator from `(master_seed, trial_index)`,
//! so the sampled configurations — and therefore the whole search — do not
//! depend on execution order or on how many trials run concurrently.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fmath;
use crate::lstm::{LstmConfig, LstmModel};
use crate::rng::derived_rng;
use crate::training::{train, LabeledSeries, TrainConfig};

/// Momentum is sampled log-uniformly up to 1.0, but 1.0 itself is
/// non-convergent; boundary samples clamp here.
pub const MOMENTUM_CAP: f64 = 0.999;

/// Inclusive log-uniform sampling ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub num_blocks: (usize, usize),
    pub learning_rate: (f64, f64),
    pub momentum: (f64, f64),
    pub batch_size: (usize, usize),
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            num_blocks: (2, 200),
            learning_rate: (1e-5, 1.0),
            momentum: (0.01, 1.0),
            batch_size: (200, 1000),
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        fn check(name: &str, lo: f64, hi: f64) -> Result<()> {
            if !(lo > 0.0) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidSpace(format!(
                    "{name}: log-uniform bounds must be positive and finite"
                )));
            }
            if hi < lo {
                return Err(Error::InvalidSpace(format!(
                    "{name}: upper bound {hi} below lower bound {lo}"
                )));
            }
            Ok(())
        }
        check(
            "num_blocks",
            self.num_blocks.0 as f64,
            self.num_blocks.1 as f64,
        )?;
        check("learning_rate", self.learning_rate.0, self.learning_rate.1)?;
        check("momentum", self.momentum.0, self.momentum.1)?;
        check(
            "batch_size",
            self.batch_size.0 as f64,
            self.batch_size.1 as f64,
        )
    }
}

/// One evaluated trial. `val_loss` is the best-epoch validation loss and is
/// `+inf` when the run diverged; diverged trials stay in the ranking.
/// `wall_seconds` is filled by callers that time trials (it carries no
/// reproducibility guarantee and never influences ranking).
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial_index: u64,
    pub lstm_config: LstmConfig,
    pub train_config: TrainConfig,
    pub val_loss: f64,
    pub val_acc: f64,
    /// 1-based best epoch; 0 for diverged trials.
    pub best_epoch: usize,
    pub diverged: bool,
    pub wall_seconds: Option<f64>,
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let sample = fmath::exp(rng.gen_range(fmath::ln(lo)..=fmath::ln(hi)));
    sample.clamp(lo, hi)
}

fn log_uniform_int(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> usize {
    let sample = fmath::round(log_uniform(rng, lo as f64, hi as f64)) as usize;
    sample.clamp(lo, hi)
}

/// Draws the trial's hyperparameters. Deterministic in
/// `(master_seed, trial_index)`; the draw order is fixed (blocks, learning
/// rate, momentum, batch size, then the two derived seeds) and unaffected
/// by other trials. Non-sampled training fields come from defaults; see
/// [`sample_config_from`] to supply them.
pub fn sample_config(
    space: &SearchSpace,
    master_seed: u64,
    trial_index: u64,
) -> Result<(LstmConfig, TrainConfig)> {
    sample_config_from(space, master_seed, trial_index, &TrainConfig::default())
}

/// [`sample_config`] with explicit non-sampled training fields (optimizer,
/// epoch budget, patience, quasi-Newton memory) taken from `base`.
pub fn sample_config_from(
    space: &SearchSpace,
    master_seed: u64,
    trial_index: u64,
    base: &TrainConfig,
) -> Result<(LstmConfig, TrainConfig)> {
    space.validate()?;
    let mut rng = derived_rng(master_seed, trial_index);
    let num_blocks = log_uniform_int(&mut rng, space.num_blocks.0, space.num_blocks.1);
    let learning_rate = log_uniform(&mut rng, space.learning_rate.0, space.learning_rate.1);
    let momentum = log_uniform(&mut rng, space.momentum.0, space.momentum.1).min(MOMENTUM_CAP);
    let batch_size = log_uniform_int(&mut rng, space.batch_size.0, space.batch_size.1);
    let lstm_seed: u64 = rng.gen();
    let train_seed: u64 = rng.gen();

    let lstm = LstmConfig {
        num_blocks,
        seed: lstm_seed,
        ..LstmConfig::default()
    };
    let train = TrainConfig {
        learning_rate,
        momentum,
        batch_size,
        seed: train_seed,
        ..base.clone()
    };
    Ok((lstm, train))
}

/// Ascending validation loss, ties broken by trial index. Infinite scores
/// (diverged trials) sort last.
pub fn rank_trials(results: &mut [TrialResult]) {
    results.sort_by(|a, b| {
        a.val_loss
            .total_cmp(&b.val_loss)
            .then(a.trial_index.cmp(&b.trial_index))
    });
}

/// Runs `trials` independent training runs over sampled configurations and
/// returns them ranked. Diverged trials are kept with an infinite score;
/// if every trial diverges there is nothing to rank and the search fails.
pub fn random_search(
    space: &SearchSpace,
    train_set: &[LabeledSeries],
    val_set: &[LabeledSeries],
    trials: u64,
    master_seed: u64,
    base: &TrainConfig,
) -> Result<Vec<TrialResult>> {
    random_search_with(space, trials, master_seed, base, |_, lstm, cfg| {
        let model = LstmModel::init(lstm.clone())?;
        let run = train(&model, train_set, val_set, cfg)?;
        let at = run.best_epoch - 1;
        Ok((run.val_loss[at], run.val_acc[at], run.best_epoch))
    })
}

/// Search over an injectable trial runner returning
/// `(val_loss, val_acc, best_epoch)`. Divergence errors from the runner are
/// recorded as infinite-score results; any other error aborts the search.
pub fn random_search_with(
    space: &SearchSpace,
    trials: u64,
    master_seed: u64,
    base: &TrainConfig,
    mut runner: impl FnMut(u64, &LstmConfig, &TrainConfig) -> Result<(f64, f64, usize)>,
) -> Result<Vec<TrialResult>> {
    if trials == 0 {
        return Err(Error::InvalidArgument(String::from(
            "search needs at least one trial",
        )));
    }
    let mut results = Vec::with_capacity(trials as usize);
    for index in 0..trials {
        let (lstm_config, train_config) = sample_config_from(space, master_seed, index, base)?;
        let mut result = TrialResult {
            trial_index: index,
            lstm_config,
            train_config,
            val_loss: f64::INFINITY,
            val_acc: 0.0,
            best_epoch: 0,
            diverged: true,
            wall_seconds: None,
        };
        match runner(index, &result.lstm_config, &result.train_config) {
            Ok((val_loss, val_acc, best_epoch)) if val_loss.is_finite() => {
                result.val_loss = val_loss;
                result.val_acc = val_acc;
                result.best_epoch = best_epoch;
                result.diverged = false;
            }
            Ok(_) | Err(Error::Diverged { .. }) => {}
            Err(other) => return Err(other),
        }
        results.push(result);
    }
    if results.iter().all(|r| r.diverged) {
        return Err(Error::NoViableConfig);
    }
    rank_trials(&mut results);
    Ok(results)
}
