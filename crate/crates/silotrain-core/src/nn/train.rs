//! Mini-batch SGD with early stopping on the evaluation metric.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::arch::NetworkArchitecture;
use super::metrics::{bce_loss, Metric};
use super::ops::{backward_from_trace, evaluate, forward_trace};
use super::params::{sgd_step, ModelParameters};
use super::NnError;
use crate::data::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Number of consecutive non-improving epochs tolerated before stopping.
    /// Zero means a single epoch runs.
    pub patience: usize,
    pub rng_seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 100,
            batch_size: 200,
            learning_rate: 0.05,
            patience: 10,
            rng_seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.epochs == 0 {
            return Err(NnError::Domain(String::from("epochs must be positive")));
        }
        if self.batch_size == 0 {
            return Err(NnError::Domain(String::from("batch size must be positive")));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(NnError::Domain(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// One epoch of history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch_index: usize,
    pub train_loss: f64,
    pub eval_loss: f64,
    pub eval_accuracy: f64,
    /// Whether this epoch strictly improved the monitored metric.
    pub improved: bool,
}

/// Passed to the improvement callback at every new best.
#[derive(Debug)]
pub struct ImprovementSnapshot<'a> {
    pub epoch_index: usize,
    pub metric: Metric,
    pub params: &'a ModelParameters,
}

/// Trains with shuffled mini-batches, evaluating after each epoch. The
/// monitored metric is (accuracy, then lower loss) on the evaluation set;
/// only strict improvement resets the patience counter or fires the
/// callback. Returns the best parameters seen and the full epoch history.
pub fn train(
    arch: &NetworkArchitecture,
    initial: ModelParameters,
    train_set: &Dataset,
    eval_set: &Dataset,
    config: &TrainingConfig,
    mut on_improve: impl FnMut(ImprovementSnapshot<'_>),
) -> Result<(ModelParameters, Vec<EpochRecord>), NnError> {
    config.validate()?;
    if train_set.is_empty() || eval_set.is_empty() {
        return Err(NnError::Domain(String::from(
            "training and evaluation sets must be non-empty",
        )));
    }
    initial.check_against(arch)?;

    let mut rng = ChaCha20Rng::seed_from_u64(config.rng_seed);
    let mut params = initial;
    let mut indices: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(Metric, ModelParameters)> = None;
    let mut stale_epochs = 0usize;

    for epoch_index in 0..config.epochs {
        indices.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in indices.chunks(config.batch_size) {
            let (batch, labels) = train_set.gather(chunk);
            let trace = forward_trace(arch, &params, &batch)?;
            let preds = trace.last().expect("non-empty trace").values();
            loss_sum += bce_loss(preds, &labels)? * chunk.len() as f64;
            let grads = backward_from_trace(arch, &params, &trace, &labels)?;
            params = sgd_step(&params, &grads, config.learning_rate)?;
        }
        let train_loss = loss_sum / train_set.len() as f64;

        let metric = evaluate(arch, &params, eval_set.batch_iter(config.batch_size))?;
        let improved = match &best {
            Some((incumbent, _)) => metric.beats(incumbent),
            None => true,
        };
        if improved {
            best = Some((metric, params.clone()));
            stale_epochs = 0;
            on_improve(ImprovementSnapshot {
                epoch_index,
                metric,
                params: &params,
            });
        } else {
            stale_epochs += 1;
        }
        history.push(EpochRecord {
            epoch_index,
            train_loss,
            eval_loss: metric.loss,
            eval_accuracy: metric.accuracy,
            improved,
        });
        if stale_epochs >= config.patience {
            break;
        }
    }

    let (_, best_params) = best.expect("at least one epoch ran");
    Ok((best_params, history))
}

/// Loss and accuracy of fixed parameters over a dataset.
pub fn evaluate_on(
    arch: &NetworkArchitecture,
    params: &ModelParameters,
    dataset: &Dataset,
    batch_size: usize,
) -> Result<Metric, NnError> {
    if dataset.is_empty() {
        return Err(NnError::Domain(String::from("evaluation set is empty")));
    }
    evaluate(arch, params, dataset.batch_iter(batch_size))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthesize;
    use crate::nn::params::init_random;
    use crate::seed::derive_seed;

    fn small_sets() -> (Dataset, Dataset) {
        let ds = synthesize(40, 17).unwrap();
        crate::data::stratified_holdout(&ds, 0.8, 3).unwrap()
    }

    #[test]
    fn patience_zero_runs_exactly_one_epoch() {
        let arch = NetworkArchitecture::for_depth(2).unwrap();
        let (train_set, eval_set) = small_sets();
        let config = TrainingConfig {
            epochs: 50,
            batch_size: 16,
            patience: 0,
            ..TrainingConfig::default()
        };
        let (_, history) = train(
            &arch,
            init_random(&arch, 1),
            &train_set,
            &eval_set,
            &config,
            |_| {},
        )
        .unwrap();
        assert_eq!(history.len(), 1);
    }

    #[test]
    fn stops_after_patience_non_improving_epochs() {
        let arch = NetworkArchitecture::for_depth(2).unwrap();
        let (train_set, eval_set) = small_sets();
        let config = TrainingConfig {
            epochs: 100,
            batch_size: 16,
            patience: 3,
            learning_rate: 0.05,
            rng_seed: 5,
        };
        let (_, history) = train(
            &arch,
            init_random(&arch, 2),
            &train_set,
            &eval_set,
            &config,
            |_| {},
        )
        .unwrap();
        if history.len() < config.epochs {
            let tail = &history[history.len() - 3..];
            assert!(tail.iter().all(|r| !r.improved));
        }
    }

    #[test]
    fn deterministic_for_fixed_seeds() {
        let arch = NetworkArchitecture::for_depth(2).unwrap();
        let (train_set, eval_set) = small_sets();
        let config = TrainingConfig {
            epochs: 4,
            batch_size: 16,
            patience: 10,
            ..TrainingConfig::default()
        };
        let run = || {
            train(
                &arch,
                init_random(&arch, 3),
                &train_set,
                &eval_set,
                &config,
                |_| {},
            )
            .unwrap()
        };
        let (p1, h1) = run();
        let (p2, h2) = run();
        assert_eq!(p1, p2);
        assert_eq!(h1, h2);
    }

    #[test]
    fn callback_fires_once_per_improvement_and_best_is_monotone() {
        let arch = NetworkArchitecture::for_depth(2).unwrap();
        let (train_set, eval_set) = small_sets();
        let config = TrainingConfig {
            epochs: 12,
            batch_size: 16,
            patience: 12,
            ..TrainingConfig::default()
        };
        let mut metrics: Vec<Metric> = Vec::new();
        let (_, history) = train(
            &arch,
            init_random(&arch, 4),
            &train_set,
            &eval_set,
            &config,
            |snap| metrics.push(snap.metric),
        )
        .unwrap();
        assert_eq!(
            metrics.len(),
            history.iter().filter(|r| r.improved).count()
        );
        for pair in metrics.windows(2) {
            assert!(pair[1].beats(&pair[0]));
        }
    }

    #[test]
    fn best_params_match_last_improvement_snapshot() {
        let arch = NetworkArchitecture::for_depth(2).unwrap();
        let (train_set, eval_set) = small_sets();
        let config = TrainingConfig {
            epochs: 10,
            batch_size: 16,
            patience: 4,
            ..TrainingConfig::default()
        };
        let mut last_snapshot: Option<ModelParameters> = None;
        let (best, _) = train(
            &arch,
            init_random(&arch, 6),
            &train_set,
            &eval_set,
            &config,
            |snap| last_snapshot = Some(snap.params.clone()),
        )
        .unwrap();
        assert_eq!(best, last_snapshot.unwrap());
    }

    #[test]
    fn separable_task_reaches_high_accuracy() {
        let arch = NetworkArchitecture::for_depth(2).unwrap();
        let ds = synthesize(100, derive_seed(11, "sep"));
        let (train_set, eval_set) = crate::data::stratified_holdout(&ds.unwrap(), 0.8, 1).unwrap();
        let config = TrainingConfig {
            epochs: 100,
            batch_size: 32,
            patience: 100,
            learning_rate: 0.2,
            rng_seed: 9,
        };
        let (best, history) = train(
            &arch,
            init_random(&arch, 8),
            &train_set,
            &eval_set,
            &config,
            |_| {},
        )
        .unwrap();
        let final_metric = evaluate_on(&arch, &best, &eval_set, 32).unwrap();
        assert!(
            final_metric.accuracy >= 0.95,
            "best accuracy {} after {} epochs",
            final_metric.accuracy,
            history.len()
        );
    }

    #[test]
    fn rejects_empty_sets_and_bad_config() {
        let arch = NetworkArchitecture::for_depth(2).unwrap();
        let (train_set, eval_set) = small_sets();
        let empty = Dataset::default();
        let config = TrainingConfig::default();
        assert!(matches!(
            train(&arch, init_random(&arch, 0), &empty, &eval_set, &config, |_| {}),
            Err(NnError::Domain(_))
        ));
        let bad = TrainingConfig {
            learning_rate: 0.0,
            ..TrainingConfig::default()
        };
        assert!(matches!(
            train(&arch, init_random(&arch, 0), &train_set, &eval_set, &bad, |_| {}),
            Err(NnError::Domain(_))
        ));
    }
}

