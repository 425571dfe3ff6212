use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::{batch, AugmentConfig, Dataset};
use crate::error::{Error, Result};
use crate::models::{save_to_path, Model};
use crate::tensor::ops::{mae, mse_loss};
use crate::tensor::{AdamConfig, AdamState};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub augment: AugmentConfig,
    pub seed: u64,
    /// Save a checkpoint (with optimizer state) every this many epochs.
    pub checkpoint_every: Option<usize>,
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 300,
            adam: AdamConfig::default(),
            augment: AugmentConfig::default(),
            seed: 0,
            checkpoint_every: None,
            checkpoint_path: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if self.checkpoint_every == Some(0) {
            return Err(Error::config("checkpoint cadence must be positive"));
        }
        self.augment.validate()
    }

    /// Generator steps per epoch: `ceil(len / batch_size)`.
    pub fn steps_per_epoch(&self, dataset_len: usize) -> usize {
        dataset_len.div_ceil(self.batch_size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub steps: usize,
    pub mean_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochStats>,
    pub optimizer: AdamState,
}

/// Minibatch Adam on the mean squared steering error. Batches are drawn
/// with replacement and augmented; a non-finite loss aborts.
pub fn train(model: &mut Model, dataset: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut optimizer = AdamState::new(model.params(), config.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let steps = config.steps_per_epoch(dataset.len());
    let mut history = Vec::with_capacity(config.epochs);
    let mut step = 0;
    for epoch in 1..=config.epochs {
        let mut total = 0.0;
        for _ in 0..steps {
            let b = batch(dataset, &mut rng, config.batch_size, &config.augment)?;
            let mut grads = model.zero_grads();
            let loss = model.batch_loss_and_grads(&b.inputs, &b.targets, &mut grads)?;
            step += 1;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    step,
                    loss: f64::from(loss),
                });
            }
            optimizer.step(model.params_mut(), &grads)?;
            total += f64::from(loss);
        }
        history.push(EpochStats {
            epoch,
            steps,
            mean_loss: total / steps as f64,
        });
        if let (Some(every), Some(path)) = (config.checkpoint_every, &config.checkpoint_path) {
            if epoch % every == 0 {
                save_to_path(path, model, Some(&optimizer))?;
            }
        }
    }
    Ok(TrainOutcome { history, optimizer })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OfflineMetrics {
    pub samples: usize,
    pub mse: f64,
    pub mae: f64,
    /// MSE of always predicting zero.
    pub zero_baseline_mse: f64,
}

/// Unaugmented error over every sample.
pub fn evaluate_offline(model: &Model, dataset: &Dataset) -> Result<OfflineMetrics> {
    evaluate_predictions(dataset, |s| model.predict(&s.frame))
}

pub fn evaluate_predictions(
    dataset: &Dataset,
    mut predict: impl FnMut(&crate::data::Sample) -> Result<f32>,
) -> Result<OfflineMetrics> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut pred = Vec::with_capacity(dataset.len());
    for s in dataset.samples() {
        pred.push(f64::from(predict(s)?));
    }
    let target: Vec<f64> = dataset.angles().iter().map(|&a| f64::from(a)).collect();
    let zeros = vec![0.0; target.len()];
    Ok(OfflineMetrics {
        samples: dataset.len(),
        mse: mse_loss(&pred, &target)?,
        mae: mae(&pred, &target)?,
        zero_baseline_mse: mse_loss(&zeros, &target)?,
    })
}
