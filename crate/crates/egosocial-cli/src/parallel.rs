//! Multi-threaded random hyperparameter search.
//!
//! Trials are handed to workers through an atomic counter and every trial
//! seeds its own generator from `(master_seed, trial_index)`, so the ranked
//! results are identical for any worker count — only `wall_seconds`, which
//! is measurement rather than output, varies between runs.
//!
//! Semantics match the single-threaded search in the core crate: a diverged
//! trial is kept with an infinite score, any other error aborts the whole
//! search, and a search where every trial diverged reports that no viable
//! configuration exists.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Instant;

use egosocial_core::lstm::LstmModel;
use egosocial_core::search::{rank_trials, sample_config_from, SearchSpace, TrialResult};
use egosocial_core::training::{train, LabeledSeries, TrainConfig};
use egosocial_core::{Error, Result};

/// Runs `trials` training runs over sampled configurations on `workers`
/// threads and returns them ranked by validation loss.
pub fn run_search(
    space: &SearchSpace,
    train_set: &[LabeledSeries],
    val_set: &[LabeledSeries],
    trials: u64,
    master_seed: u64,
    base: &TrainConfig,
    workers: usize,
) -> Result<Vec<TrialResult>> {
    if trials == 0 {
        return Err(Error::InvalidArgument(String::from(
            "search needs at least one trial",
        )));
    }
    if workers == 0 {
        return Err(Error::InvalidArgument(String::from(
            "search needs at least one worker",
        )));
    }
    space.validate()?;

    let next = AtomicU64::new(0);
    let abort = AtomicBool::new(false);
    let slots: Mutex<Vec<Option<TrialResult>>> = Mutex::new(vec![None; trials as usize]);
    let failure: Mutex<Option<Error>> = Mutex::new(None);

    thread::scope(|scope| {
        for _ in 0..workers.min(trials as usize) {
            scope.spawn(|| loop {
                if abort.load(Ordering::Relaxed) {
                    break;
                }
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= trials {
                    break;
                }
                match run_trial(space, train_set, val_set, master_seed, index, base) {
                    Ok(result) => {
                        slots.lock().expect("result mutex poisoned")[index as usize] = Some(result);
                    }
                    Err(e) => {
                        let mut first = failure.lock().expect("failure mutex poisoned");
                        first.get_or_insert(e);
                        abort.store(true, Ordering::Relaxed);
                        break;
                    }
                }
            });
        }
    });

    if let Some(e) = failure.into_inner().expect("failure mutex poisoned") {
        return Err(e);
    }
    let mut results: Vec<TrialResult> = slots
        .into_inner()
        .expect("result mutex poisoned")
        .into_iter()
        .map(|slot| slot.expect("every trial ran to completion"))
        .collect();
    if results.iter().all(|r| r.diverged) {
        return Err(Error::NoViableConfig);
    }
    rank_trials(&mut results);
    Ok(results)
}

/// One trial: sample the configuration, train, time it. Divergence comes
/// back as an infinite-score result rather than an error.
fn run_trial(
    space: &SearchSpace,
    train_set: &[LabeledSeries],
    val_set: &[LabeledSeries],
    master_seed: u64,
    index: u64,
    base: &TrainConfig,
) -> Result<TrialResult> {
    let (lstm_config, train_config) = sample_config_from(space, master_seed, index, base)?;
    let started = Instant::now();
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
    let outcome = LstmModel::init(result.lstm_config.clone())
        .and_then(|model| train(&model, train_set, val_set, &result.train_config));
    match outcome {
        Ok(run) => {
            let at = run.best_epoch - 1;
            if run.val_loss[at].is_finite() {
                result.val_loss = run.val_loss[at];
                result.val_acc = run.val_acc[at];
                result.best_epoch = run.best_epoch;
                result.diverged = false;
            }
        }
        Err(Error::Diverged { .. }) => {}
        Err(other) => return Err(other),
    }
    result.wall_seconds = Some(started.elapsed().as_secs_f64());
    Ok(result)
}

/// The same result with the timing measurement removed, for comparing
/// search outputs across runs or worker counts.
pub fn without_timing(result: &TrialResult) -> TrialResult {
    TrialResult {
        wall_seconds: None,
        ..result.clone()
    }
}
