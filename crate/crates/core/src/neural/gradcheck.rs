//! Central finite-difference verification of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::gru::{backward, forward, loss};
use super::params::{init_params, Dims, GruParams, TENSOR_NAMES};
use super::NeuralError;
use crate::features::Spectrogram;

pub const FD_STEP: f64 = 1e-4;
pub const MAX_RELATIVE_ERROR: f64 = 1e-4;
/// Denominator floor for the relative error so that entries whose true
/// gradient is exactly zero do not divide by zero.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-8;
pub const DEFAULT_DIMS: Dims = Dims { inputs: 5, hidden: 4, classes: 3 };
pub const DEFAULT_STEPS: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorCheck {
    pub name: &'static str,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub seed: u64,
    pub tensors: Vec<TensorCheck>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.tensors.iter().all(|t| t.max_relative_error < MAX_RELATIVE_ERROR)
    }

    pub fn worst(&self) -> &TensorCheck {
        self.tensors
            .iter()
            .max_by(|a, b| a.max_relative_error.total_cmp(&b.max_relative_error))
            .expect("at least one tensor")
    }
}

/// Random parameters and input for a check. Gate weights come from the usual
/// initializer; the head bias is randomized too so its gradient is not
/// trivially symmetric.
pub fn random_instance(seed: u64, dims: Dims, steps: usize) -> (GruParams<f64>, Spectrogram<f64>, usize) {
    let mut params = init_params::<f64>(seed, dims);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    for b in &mut params.head_b {
        *b = rng.gen_range(-0.5..0.5);
    }
    let values: Vec<f64> = (0..steps * dims.inputs).map(|_| rng.sample(StandardNormal)).collect();
    let spec = Spectrogram::new(values, dims.inputs, steps).expect("valid shape");
    let class = rng.gen_range(0..dims.classes);
    (params, spec, class)
}

fn example_loss(params: &GruParams<f64>, spec: &Spectrogram<f64>, class: usize) -> Result<f64, NeuralError> {
    loss(&forward(params, spec)?.probs, class)
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

/// Compare analytic and central-difference gradients for every entry of
/// every tensor. `corrupt` names a tensor whose analytic gradient gets a
/// deliberate error, to prove the check can fail.
pub fn check_gradients(
    params: &GruParams<f64>,
    spec: &Spectrogram<f64>,
    class: usize,
    corrupt: Option<&str>,
) -> Result<Vec<TensorCheck>, NeuralError> {
    let state = forward(params, spec)?;
    let mut analytic = backward(params, &state, spec, class)?;
    if let Some(name) = corrupt {
        let t = analytic
            .tensor_mut(name)
            .ok_or_else(|| NeuralError::Format(format!("unknown tensor {name:?}")))?;
        t[0] += 1e-2 + t[0].abs();
    }

    let mut probe = params.clone();
    let mut out = Vec::with_capacity(TENSOR_NAMES.len());
    for (ti, name) in TENSOR_NAMES.iter().enumerate() {
        let len = params.tensors()[ti].len();
        let mut worst = 0.0f64;
        for i in 0..len {
            let orig = params.tensors()[ti][i];
            probe.tensors_mut()[ti][i] = orig + FD_STEP;
            let up = example_loss(&probe, spec, class)?;
            probe.tensors_mut()[ti][i] = orig - FD_STEP;
            let down = example_loss(&probe, spec, class)?;
            probe.tensors_mut()[ti][i] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(analytic.tensors()[ti][i], numeric));
        }
        out.push(TensorCheck { name, max_relative_error: worst });
    }
    Ok(out)
}

/// The standard check: a `T=7, B=5, H=4, C=3` instance drawn from `seed`.
pub fn gradcheck(seed: u64, corrupt: Option<&str>) -> Result<GradcheckReport, NeuralError> {
    let (params, spec, class) = random_instance(seed, DEFAULT_DIMS, DEFAULT_STEPS);
    Ok(GradcheckReport { seed, tensors: check_gradients(&params, &spec, class, corrupt)? })
}
