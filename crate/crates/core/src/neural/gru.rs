//! Forward pass and backpropagation through time for the bi-directional GRU
//! with temporal mean pooling and a softmax head.
//!
//! Per direction and step, with `s` the previous state (the state of step
//! `t-1` going forward, of step `t+1` going backward):
//!
//! ```text
//! z   = sigmoid(x U_z + s W_z)
//! r   = sigmoid(x U_r + s W_r)
//! h   = tanh(x U_h + (s * r) W_h)
//! s'  = (1 - z) * h + z * s
//! ```
//!
//! The utterance vector is the mean over valid steps of
//! `[s_fw(t), s_bw(t)]`, and class probabilities are `softmax(c W + b)`.

use super::params::{GruDirection, GruParams};
use super::NeuralError;
use crate::features::Spectrogram;
use crate::scalar::Scalar;

/// Activations of one direction, stored in processing order as
/// `steps x hidden` row-major blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionTrace<T> {
    pub hidden: usize,
    pub z: Vec<T>,
    pub r: Vec<T>,
    pub h: Vec<T>,
    pub s: Vec<T>,
}

impl<T: Scalar> DirectionTrace<T> {
    fn with_capacity(steps: usize, hidden: usize) -> Self {
        let cap = steps * hidden;
        DirectionTrace { hidden, z: Vec::with_capacity(cap), r: Vec::with_capacity(cap), h: Vec::with_capacity(cap), s: Vec::with_capacity(cap) }
    }

    pub fn steps(&self) -> usize {
        self.s.len() / self.hidden
    }

    /// State after processing step `i` (processing order).
    pub fn state(&self, i: usize) -> &[T] {
        &self.s[i * self.hidden..(i + 1) * self.hidden]
    }

    fn at<'a>(&self, v: &'a [T], i: usize) -> &'a [T] {
        &v[i * self.hidden..(i + 1) * self.hidden]
    }
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GruState<T> {
    pub fw: DirectionTrace<T>,
    /// Processed from the last valid frame to the first.
    pub bw: DirectionTrace<T>,
    /// Mean of the concatenated states, `2H` long, forward half first.
    pub pooled: Vec<T>,
    pub logits: Vec<T>,
    pub probs: Vec<T>,
}

impl<T: Scalar> GruState<T> {
    pub fn steps(&self) -> usize {
        self.fw.steps()
    }

    /// `s_fw` at time `t` (0-based).
    pub fn s_fw(&self, t: usize) -> &[T] {
        self.fw.state(t)
    }

    /// `s_bw` at time `t` (0-based), i.e. after the backward recurrence has
    /// consumed frames `T-1` down to `t`.
    pub fn s_bw(&self, t: usize) -> &[T] {
        self.bw.state(self.steps() - 1 - t)
    }
}

pub fn sigmoid<T: Scalar>(a: T) -> T {
    T::one() / (T::one() + (-a).exp())
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn run_direction<'a, T: Scalar>(
    p: &GruDirection<T>,
    frames: impl Iterator<Item = &'a [T]>,
    steps: usize,
) -> DirectionTrace<T> {
    let hidden = p.w_z.rows();
    let mut tr = DirectionTrace::with_capacity(steps, hidden);
    let mut prev = vec![T::zero(); hidden];
    let mut a_z = vec![T::zero(); hidden];
    let mut a_r = vec![T::zero(); hidden];
    let mut a_h = vec![T::zero(); hidden];
    let mut sr = vec![T::zero(); hidden];
    for x in frames {
        a_z.iter_mut().chain(a_r.iter_mut()).chain(a_h.iter_mut()).for_each(|v| *v = T::zero());
        p.u_z.acc_vec_mul(x, &mut a_z);
        p.w_z.acc_vec_mul(&prev, &mut a_z);
        p.u_r.acc_vec_mul(x, &mut a_r);
        p.w_r.acc_vec_mul(&prev, &mut a_r);
        let r: Vec<T> = a_r.iter().map(|&a| sigmoid(a)).collect();
        for ((o, &s), &ri) in sr.iter_mut().zip(&prev).zip(&r) {
            *o = s * ri;
        }
        p.u_h.acc_vec_mul(x, &mut a_h);
        p.w_h.acc_vec_mul(&sr, &mut a_h);
        for j in 0..hidden {
            let z = sigmoid(a_z[j]);
            let h = a_h[j].tanh();
            let s = (T::one() - z) * h + z * prev[j];
            tr.z.push(z);
            tr.h.push(h);
            tr.s.push(s);
            prev[j] = s;
        }
        tr.r.extend_from_slice(&r);
    }
    tr
}

fn check_input<T: Scalar>(params: &GruParams<T>, spec: &Spectrogram<T>) -> Result<(), NeuralError> {
    let inputs = params.dims().inputs;
    if spec.n_bands() != inputs {
        return Err(NeuralError::DimensionMismatch { expected: inputs, got: spec.n_bands() });
    }
    if let Some(t) = spec.frames().position(|f| f.iter().any(|v| !v.is_finite())) {
        return Err(NeuralError::NonFiniteInput { frame: t });
    }
    Ok(())
}

/// Run both recurrences over the valid frames, pool, and classify.
pub fn forward<T: Scalar>(params: &GruParams<T>, spec: &Spectrogram<T>) -> Result<GruState<T>, NeuralError> {
    check_input(params, spec)?;
    let steps = spec.valid_frames();
    let hidden = params.dims().hidden;
    let fw = run_direction(&params.fw, spec.frames(), steps);
    let bw = run_direction(&params.bw, spec.frames().rev(), steps);

    let inv_t = T::one() / T::of(steps as f64);
    let mut pooled = vec![T::zero(); 2 * hidden];
    for i in 0..steps {
        for j in 0..hidden {
            pooled[j] += fw.state(i)[j];
            pooled[hidden + j] += bw.state(i)[j];
        }
    }
    pooled.iter_mut().for_each(|v| *v *= inv_t);

    let mut logits = params.head_b.clone();
    params.head_w.acc_vec_mul(&pooled, &mut logits);
    let probs = softmax(&logits);
    Ok(GruState { fw, bw, pooled, logits, probs })
}

pub const LOG_CLAMP: f64 = 1e-12;

/// Cross-entropy `-ln(max(p[class], 1e-12))`.
pub fn loss<T: Scalar>(probs: &[T], true_class: usize) -> Result<T, NeuralError> {
    let p = *probs.get(true_class).ok_or(NeuralError::BadClassIndex { index: true_class, classes: probs.len() })?;
    if p.is_nan() {
        return Ok(p);
    }
    Ok(-p.max(T::of(LOG_CLAMP)).ln())
}

/// Backpropagate one direction. `d_pool` is the loss gradient reaching every
/// step's state through the mean pooling (already divided by `T`).
fn backprop_direction<T: Scalar>(
    p: &GruDirection<T>,
    tr: &DirectionTrace<T>,
    frames: &[&[T]],
    d_pool: &[T],
    g: &mut GruDirection<T>,
) {
    let hidden = tr.hidden;
    let zeros = vec![T::zero(); hidden];
    let mut carry = vec![T::zero(); hidden];
    let mut ds = vec![T::zero(); hidden];
    let mut da_z = vec![T::zero(); hidden];
    let mut da_r = vec![T::zero(); hidden];
    let mut da_h = vec![T::zero(); hidden];
    let mut d_sr = vec![T::zero(); hidden];
    let mut sr = vec![T::zero(); hidden];
    for i in (0..tr.steps()).rev() {
        let x = frames[i];
        let prev = if i == 0 { &zeros[..] } else { tr.state(i - 1) };
        let (z, r, h) = (tr.at(&tr.z, i), tr.at(&tr.r, i), tr.at(&tr.h, i));
        for j in 0..hidden {
            ds[j] = d_pool[j] + carry[j];
            let dh = ds[j] * (T::one() - z[j]);
            let dz = ds[j] * (prev[j] - h[j]);
            da_h[j] = dh * (T::one() - h[j] * h[j]);
            da_z[j] = dz * z[j] * (T::one() - z[j]);
            sr[j] = prev[j] * r[j];
            // Direct path through the convex combination.
            carry[j] = ds[j] * z[j];
            d_sr[j] = T::zero();
        }
        g.u_h.acc_outer(x, &da_h);
        g.w_h.acc_outer(&sr, &da_h);
        p.w_h.acc_mul_vec(&da_h, &mut d_sr);
        for j in 0..hidden {
            carry[j] += d_sr[j] * r[j];
            let dr = d_sr[j] * prev[j];
            da_r[j] = dr * r[j] * (T::one() - r[j]);
        }
        g.u_r.acc_outer(x, &da_r);
        g.w_r.acc_outer(prev, &da_r);
        p.w_r.acc_mul_vec(&da_r, &mut carry);
        g.u_z.acc_outer(x, &da_z);
        g.w_z.acc_outer(prev, &da_z);
        p.w_z.acc_mul_vec(&da_z, &mut carry);
    }
}

/// Gradient of the cross-entropy loss with respect to every parameter,
/// accumulated into `grads`.
pub fn backward_into<T: Scalar>(
    params: &GruParams<T>,
    state: &GruState<T>,
    spec: &Spectrogram<T>,
    true_class: usize,
    grads: &mut GruParams<T>,
) -> Result<(), NeuralError> {
    check_input(params, spec)?;
    let dims = params.dims();
    if true_class >= dims.classes {
        return Err(NeuralError::BadClassIndex { index: true_class, classes: dims.classes });
    }
    let steps = spec.valid_frames();
    if state.steps() != steps {
        return Err(NeuralError::DimensionMismatch { expected: steps, got: state.steps() });
    }
    let hidden = dims.hidden;

    let mut d_logits = state.probs.clone();
    d_logits[true_class] -= T::one();
    grads.head_w.acc_outer(&state.pooled, &d_logits);
    for (b, d) in grads.head_b.iter_mut().zip(&d_logits) {
        *b += *d;
    }
    let mut d_pooled = vec![T::zero(); 2 * hidden];
    params.head_w.acc_mul_vec(&d_logits, &mut d_pooled);
    let inv_t = T::one() / T::of(steps as f64);
    d_pooled.iter_mut().for_each(|v| *v *= inv_t);

    let forward_frames: Vec<&[T]> = spec.frames().collect();
    let backward_frames: Vec<&[T]> = spec.frames().rev().collect();
    backprop_direction(&params.fw, &state.fw, &forward_frames, &d_pooled[..hidden], &mut grads.fw);
    backprop_direction(&params.bw, &state.bw, &backward_frames, &d_pooled[hidden..], &mut grads.bw);
    Ok(())
}

pub fn backward<T: Scalar>(
    params: &GruParams<T>,
    state: &GruState<T>,
    spec: &Spectrogram<T>,
    true_class: usize,
) -> Result<GruParams<T>, NeuralError> {
    let mut grads = params.zeros_like();
    backward_into(params, state, spec, true_class, &mut grads)?;
    Ok(grads)
}

/// Forward, loss and gradient for one example.
pub fn loss_and_gradient<T: Scalar>(
    params: &GruParams<T>,
    spec: &Spectrogram<T>,
    true_class: usize,
) -> Result<(T, GruParams<T>), NeuralError> {
    let state = forward(params, spec)?;
    let l = loss(&state.probs, true_class)?;
    let grads = backward(params, &state, spec, true_class)?;
    Ok((l, grads))
}
