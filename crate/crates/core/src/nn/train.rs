use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::model::{Model, ModelConfig};
use super::NnError;
use crate::preprocess::{class_weights, WindowBatch};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 200, batch_size: 4, adam: AdamConfig::default(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean weighted loss of each epoch: `Σ w·ce / Σ w` over all windows.
    pub epoch_losses: Vec<f64>,
    pub epochs: usize,
    pub seed: u64,
    pub class_weights: Vec<f64>,
    pub model: Model,
}

const INIT_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1;

/// The parameters `train` starts from for a given seed.
pub fn initial_model(config: &ModelConfig, seed: u64) -> Result<Model, NnError> {
    Model::init(config, &mut seed::rng(seed::derive(seed, &[INIT_STREAM])))
}

/// Minibatch Adam on already-normalized windows. Class weights come from the
/// training labels; the visiting order is reshuffled every epoch.
pub fn train(config: &ModelConfig, windows: &WindowBatch, cfg: &TrainConfig) -> Result<TrainReport, NnError> {
    if windows.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    if cfg.batch_size == 0 {
        return Err(NnError::InvalidConfig("batch_size must be at least 1".into()));
    }
    if windows.window_size != config.window_size {
        return Err(NnError::ShapeMismatch { expected: vec![config.window_size], got: vec![windows.window_size] });
    }
    let mut model = initial_model(config, cfg.seed)?;
    let weights = class_weights(&windows.label_counts()).map_err(|_| NnError::EmptyDataset)?;
    let labels: Vec<usize> = windows.labels.iter().map(|g| g.index()).collect();
    let mut adam = AdamState::new(cfg.adam, &model.params());
    let mut shuffle_rng = seed::rng(seed::derive(cfg.seed, &[SHUFFLE_STREAM]));
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let per = windows.window_len();

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut batch = Vec::with_capacity(cfg.batch_size * per);
    let mut batch_labels = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut weight_sum) = (0.0, 0.0);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch_labels.clear();
            for &i in chunk {
                batch.extend_from_slice(windows.window(i));
                batch_labels.push(labels[i]);
            }
            let (loss, wsum, grads) = model.loss_and_grad(&batch, &batch_labels, &weights)?;
            loss_sum += loss * wsum;
            weight_sum += wsum;
            adam.step(model.params_mut(), &grads)?;
        }
        let epoch_loss = if weight_sum > 0.0 { loss_sum / weight_sum } else { 0.0 };
        if !epoch_loss.is_finite() {
            return Err(NnError::NonFinite);
        }
        epoch_losses.push(epoch_loss);
    }
    Ok(TrainReport { epoch_losses, epochs: cfg.epochs, seed: cfg.seed, class_weights: weights, model })
}
