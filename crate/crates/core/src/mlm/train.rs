use rand::seq::index;

use super::model::grad;
use super::params::ModelParams;
use super::vocab::TokenVocab;
use super::MlmError;
use crate::masking::MaskedInstance;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
    /// Instances per step; `None` uses the whole data set every step.
    pub batch_size: Option<usize>,
    /// Fraction of steps spent in linear warmup.
    pub warmup_fraction: f64,
}

impl TrainConfig {
    pub fn new(steps: usize, lr: f64, seed: u64) -> Self {
        Self {
            steps,
            lr,
            seed,
            batch_size: None,
            warmup_fraction: 0.1,
        }
    }

    fn warmup_steps(&self) -> usize {
        (self.warmup_fraction * self.steps as f64).ceil() as usize
    }

    /// Learning rate at 0-based `step`: linear ramp, then constant.
    pub fn lr_at(&self, step: usize) -> f64 {
        let warm = self.warmup_steps();
        if warm == 0 || step >= warm {
            self.lr
        } else {
            self.lr * (step + 1) as f64 / warm as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Batch loss at each step, measured before that step's update.
    pub losses: Vec<f64>,
    pub params: ModelParams,
}

impl TrainReport {
    /// Mean of the first `window` losses.
    pub fn initial_loss(&self, window: usize) -> f64 {
        mean(&self.losses[..window.clamp(1, self.losses.len())])
    }

    /// Mean of the last `window` losses.
    pub fn final_loss(&self, window: usize) -> f64 {
        let w = window.clamp(1, self.losses.len());
        mean(&self.losses[self.losses.len() - w..])
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Plain gradient descent with linear warmup. Deterministic given
/// `config.seed`, which only drives minibatch sampling.
pub fn train(
    params: ModelParams,
    vocab: &TokenVocab,
    data: &[MaskedInstance],
    config: &TrainConfig,
) -> Result<TrainReport, MlmError> {
    if config.steps < 1 {
        return Err(MlmError::Config("steps must be at least 1".into()));
    }
    if data.is_empty() {
        return Err(MlmError::EmptyBatch);
    }
    let mut params = params;
    let mut rng = seed::rng(config.seed);
    let mut losses = Vec::with_capacity(config.steps);
    let mut batch = Vec::new();
    for step in 0..config.steps {
        let (loss, g) = match config.batch_size {
            Some(bs) if bs < data.len() => {
                batch.clear();
                batch.extend(index::sample(&mut rng, data.len(), bs).into_iter().map(|i| data[i].clone()));
                grad(&params, vocab, &batch)?
            }
            _ => grad(&params, vocab, data)?,
        };
        if !loss.is_finite() || g.values.iter().any(|v| !v.is_finite()) {
            return Err(MlmError::Diverged { step, loss });
        }
        losses.push(loss);
        let lr = config.lr_at(step);
        if lr != 0.0 {
            for (p, d) in params.values_mut().iter_mut().zip(&g.values) {
                *p -= lr * d;
            }
        }
    }
    Ok(TrainReport { losses, params })
}
