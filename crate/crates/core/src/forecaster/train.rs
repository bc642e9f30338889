use log::{debug, info};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{AgeSplit, TrainConfig};
use super::sequences::{make_training_sequences, Dataset};
use crate::data_io::LogRateSurface;
use crate::error::{Error, Result};
use crate::neural::{
    batch_loss_and_gradients, init_cell, loss, rmsprop_step, rollout, DenseCell, Gradients,
    RmsPropState, Workspace,
};
use crate::rng;

/// RNG stream used for mini-batch sampling; stream 0 belongs to the
/// initialiser.
const BATCH_STREAM: u64 = 1;

/// A trained cell with its optimisation history.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub cell: DenseCell,
    pub config: TrainConfig,
    pub seed: u64,
    /// Mean mini-batch loss over each review window.
    pub window_losses: Vec<f64>,
    /// Full training-set loss at the end of each window.
    pub checkpoint_losses: Vec<f64>,
    /// Loss on the monitor set (if any) at the end of each window.
    pub monitor_losses: Vec<f64>,
    /// Learning rate in force after each window's review.
    pub learning_rates: Vec<f64>,
}

impl TrainedModel {
    pub fn final_learning_rate(&self) -> f64 {
        self.learning_rates
            .last()
            .copied()
            .unwrap_or(self.config.initial_rate)
    }
}

/// Learning-rate review: decay unless the window mean strictly improved.
pub fn adjust_learning_rate(previous_mean: f64, current_mean: f64, rate: f64, kappa: f64) -> f64 {
    if current_mean < previous_mean {
        rate
    } else {
        rate * kappa
    }
}

/// Trains a fresh cell on `data` with mini-batches drawn uniformly with
/// replacement.
pub fn train(cfg: &TrainConfig, data: &Dataset, seed: u64) -> Result<TrainedModel> {
    train_monitored(cfg, data, None, seed)
}

/// [`train`], also recording the loss on `monitor` after every window.
pub fn train_monitored(
    cfg: &TrainConfig,
    data: &Dataset,
    monitor: Option<&Dataset>,
    seed: u64,
) -> Result<TrainedModel> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut cell = init_cell(cfg.cell_spec()?, cfg.b_init, cfg.sigma_init, seed)?;
    let mut opt = RmsPropState::new(&cell, cfg.rmsprop())?;
    let mut rng = rng::stream(seed, BATCH_STREAM);
    let mut grads = Gradients::zeros_like(&cell);
    let mut ws = Workspace::default();
    let all = data.refs();
    let monitor_refs = monitor.map(Dataset::refs);
    let mut batch = Vec::with_capacity(cfg.batch_size);

    let windows = cfg.windows();
    let mut model = TrainedModel {
        cell: cell.clone(),
        config: cfg.clone(),
        seed,
        window_losses: Vec::with_capacity(windows),
        checkpoint_losses: Vec::with_capacity(windows),
        monitor_losses: Vec::with_capacity(windows),
        learning_rates: Vec::with_capacity(windows),
    };
    let mut rate = cfg.initial_rate;
    for w in 0..windows {
        let mut sum = 0.0;
        for s in 0..cfg.window {
            batch.clear();
            for _ in 0..cfg.batch_size {
                batch.push(all[rng.random_range(0..all.len())]);
            }
            let l = batch_loss_and_gradients(&cell, &batch, cfg.backward, &mut grads, &mut ws)?;
            let step = w * cfg.window + s;
            if !l.is_finite() || !grads.is_finite() {
                return Err(Error::Divergence { step, loss: l });
            }
            rmsprop_step(&mut opt, &mut cell, &grads)?;
            sum += l;
        }
        let mean = sum / cfg.window as f64;
        let step = (w + 1) * cfg.window;
        let full = loss(&cell, &all)?;
        if !full.is_finite() {
            return Err(Error::Divergence { step, loss: full });
        }
        if let Some(m) = &monitor_refs {
            model.monitor_losses.push(loss(&cell, m)?);
        }
        if let Some(&prev) = model.window_losses.last() {
            rate = adjust_learning_rate(prev, mean, rate, cfg.rate_decay);
            opt.config.learning_rate = rate;
        }
        model.window_losses.push(mean);
        model.checkpoint_losses.push(full);
        model.learning_rates.push(rate);
        debug!("seed {seed} step {step}: window mean {mean:.6e}, full {full:.6e}, rate {rate:.3e}");
    }
    model.cell = cell;
    Ok(model)
}

/// Batch-mean loss of `cell` over a whole dataset.
pub fn evaluate(cell: &DenseCell, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    loss(cell, &data.refs())
}

/// Mean of `prediction - target` over every rollout element in `data`.
pub fn mean_bias(cell: &DenseCell, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for s in &data.sequences {
        let out = rollout(cell, &s.window, s.target.len())?;
        sum += out.iter().zip(&s.target).map(|(o, y)| o - y).sum::<f64>();
        count += out.len();
    }
    Ok(sum / count as f64)
}

/// Out-of-sample result of retraining on training and validation ages.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalReport {
    pub train_loss: f64,
    pub test_loss: f64,
    pub test_bias: f64,
    pub seed: u64,
    pub steps: usize,
}

/// Retrains on the union of training and validation ages and scores the
/// held-out test ages.
pub fn final_protocol(
    cfg: &TrainConfig,
    x: &LogRateSurface,
    split: &AgeSplit,
    seed: u64,
) -> Result<(TrainedModel, FinalReport)> {
    split.validate(x.max_age())?;
    let train_set = make_training_sequences(
        x,
        cfg.input_size,
        cfg.n_train,
        &split.training_and_validation(),
    )?;
    let test_set = make_training_sequences(x, cfg.input_size, cfg.n_train, &split.test)?;
    let model = train(cfg, &train_set, seed)?;
    let report = FinalReport {
        train_loss: evaluate(&model.cell, &train_set)?,
        test_loss: evaluate(&model.cell, &test_set)?,
        test_bias: mean_bias(&model.cell, &test_set)?,
        seed,
        steps: cfg.steps,
    };
    info!(
        "final protocol: train loss {:.6e}, test loss {:.6e}, test bias {:+.4e}",
        report.train_loss, report.test_loss, report.test_bias
    );
    Ok((model, report))
}
