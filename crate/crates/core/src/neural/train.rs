use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gru::{forward, loss, loss_and_gradient};
use super::params::GruParams;
use super::NeuralError;
use crate::features::Spectrogram;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub hidden_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub grad_clip_norm: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_size: 32,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 16,
            max_epochs: 100,
            patience: 10,
            grad_clip_norm: 5.0,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    /// A zero learning rate is accepted so that a run can be replayed
    /// without moving the parameters.
    pub fn validate(&self) -> Result<(), String> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err("train.learning_rate must be finite and non-negative".into());
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err("train.adam_beta1 and adam_beta2 must lie in [0, 1)".into());
        }
        if !positive(self.adam_eps) || !positive(self.grad_clip_norm) {
            return Err("train.adam_eps and grad_clip_norm must be positive".into());
        }
        if self.hidden_size == 0 || self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err("train.hidden_size, batch_size, max_epochs and patience must be positive".into());
        }
        if self.patience > self.max_epochs {
            return Err("train.patience must not exceed max_epochs".into());
        }
        Ok(())
    }
}

/// One training example: features already standardized, class index.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<T> {
    pub features: Spectrogram<T>,
    pub label: usize,
}

/// Adam moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: GruParams<T>,
    pub v: GruParams<T>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &GruParams<T>) -> Self {
        AdamState { m: params.zeros_like(), v: params.zeros_like(), step: 0 }
    }

    pub fn update(&mut self, params: &mut GruParams<T>, grads: &GruParams<T>, cfg: &TrainConfig) {
        self.step += 1;
        let (b1, b2) = (T::of(cfg.adam_beta1), T::of(cfg.adam_beta2));
        let lr = T::of(cfg.learning_rate);
        let eps = T::of(cfg.adam_eps);
        let c1 = T::one() - b1.powi(self.step as i32);
        let c2 = T::one() - b2.powi(self.step as i32);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut());
        for (((p, g), m), v) in tensors {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// Scale `grads` down so its global L2 norm is at most `max_norm`.
pub fn clip_global_norm<T: Scalar>(grads: &mut GruParams<T>, max_norm: f64) -> T {
    let norm = grads.l2_norm();
    let limit = T::of(max_norm);
    if norm > limit {
        grads.scale(limit / norm);
    }
    norm
}

/// Summed loss and gradient over a batch. Per-example work runs in parallel;
/// the reduction follows batch order so the result is independent of the
/// thread count.
pub fn batch_gradient<T: Scalar>(
    params: &GruParams<T>,
    batch: &[&Example<T>],
) -> Result<(T, GruParams<T>), NeuralError> {
    let per_example: Vec<Result<(T, GruParams<T>), NeuralError>> =
        batch.par_iter().map(|ex| loss_and_gradient(params, &ex.features, ex.label)).collect();
    let mut total = T::zero();
    let mut grads = params.zeros_like();
    for r in per_example {
        let (l, g) = r?;
        total += l;
        grads.add_assign(&g);
    }
    Ok((total, grads))
}

/// One pass over `data` in an order shuffled by `rng_seed + epoch`, with
/// batch-mean gradients, global norm clipping and an Adam step per batch.
/// Returns the mean training loss, measured before each batch's update.
pub fn train_epoch<T: Scalar>(
    params: &mut GruParams<T>,
    opt: &mut AdamState<T>,
    data: &[Example<T>],
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<T, NeuralError> {
    if data.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.rng_seed.wrapping_add(epoch as u64)));

    let mut total = T::zero();
    for chunk in order.chunks(cfg.batch_size.max(1)) {
        let batch: Vec<&Example<T>> = chunk.iter().map(|&i| &data[i]).collect();
        let (batch_loss, mut grads) = batch_gradient(params, &batch)?;
        if !batch_loss.is_finite() {
            return Err(NeuralError::NonFiniteLoss { epoch });
        }
        total += batch_loss;
        grads.scale(T::one() / T::of(batch.len() as f64));
        clip_global_norm(&mut grads, cfg.grad_clip_norm);
        opt.update(params, &grads, cfg);
        if !params.is_finite() {
            return Err(NeuralError::NonFiniteLoss { epoch });
        }
    }
    Ok(total / T::of(data.len() as f64))
}

/// Mean loss and accuracy without updating anything.
pub fn evaluate_loss<T: Scalar>(params: &GruParams<T>, data: &[Example<T>]) -> Result<(T, f64), NeuralError> {
    if data.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    let results: Vec<Result<(T, usize), NeuralError>> = data
        .par_iter()
        .map(|ex| {
            let st = forward(params, &ex.features)?;
            Ok((loss(&st.probs, ex.label)?, argmax(&st.probs)))
        })
        .collect();
    let mut total = T::zero();
    let mut correct = 0;
    for (r, ex) in results.into_iter().zip(data) {
        let (l, pred) = r?;
        total += l;
        correct += usize::from(pred == ex.label);
    }
    Ok((total / T::of(data.len() as f64), correct as f64 / data.len() as f64))
}

/// Index of the largest entry; the first one on ties.
pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
