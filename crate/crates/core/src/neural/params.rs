use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::scalar::Scalar;

/// Names of every trainable tensor in storage order.
pub const TENSOR_NAMES: [&str; 14] = [
    "fw.u_z", "fw.u_r", "fw.u_h", "fw.w_z", "fw.w_r", "fw.w_h",
    "bw.u_z", "bw.u_r", "bw.u_h", "bw.w_z", "bw.w_r", "bw.w_h",
    "head.w", "head.b",
];

/// Weights of one recurrence direction. Input matrices are `inputs x hidden`,
/// recurrent ones `hidden x hidden`. The gates have no bias terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruDirection<T> {
    pub u_z: Matrix<T>,
    pub u_r: Matrix<T>,
    pub u_h: Matrix<T>,
    pub w_z: Matrix<T>,
    pub w_r: Matrix<T>,
    pub w_h: Matrix<T>,
}

impl<T: Scalar> GruDirection<T> {
    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        GruDirection {
            u_z: Matrix::zeros(inputs, hidden),
            u_r: Matrix::zeros(inputs, hidden),
            u_h: Matrix::zeros(inputs, hidden),
            w_z: Matrix::zeros(hidden, hidden),
            w_r: Matrix::zeros(hidden, hidden),
            w_h: Matrix::zeros(hidden, hidden),
        }
    }

    fn tensors(&self) -> [&[T]; 6] {
        [self.u_z.as_slice(), self.u_r.as_slice(), self.u_h.as_slice(), self.w_z.as_slice(), self.w_r.as_slice(), self.w_h.as_slice()]
    }

    fn tensors_mut(&mut self) -> [&mut [T]; 6] {
        [
            self.u_z.as_mut_slice(),
            self.u_r.as_mut_slice(),
            self.u_h.as_mut_slice(),
            self.w_z.as_mut_slice(),
            self.w_r.as_mut_slice(),
            self.w_h.as_mut_slice(),
        ]
    }
}

/// Bi-directional GRU plus softmax head. The head maps the pooled `2H`
/// vector (forward half first) to `C` logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruParams<T> {
    pub fw: GruDirection<T>,
    pub bw: GruDirection<T>,
    pub head_w: Matrix<T>,
    pub head_b: Vec<T>,
}

/// `(inputs, hidden, classes)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub inputs: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl<T: Scalar> GruParams<T> {
    pub fn zeros(dims: Dims) -> Self {
        GruParams {
            fw: GruDirection::zeros(dims.inputs, dims.hidden),
            bw: GruDirection::zeros(dims.inputs, dims.hidden),
            head_w: Matrix::zeros(2 * dims.hidden, dims.classes),
            head_b: vec![T::zero(); dims.classes],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims())
    }

    pub fn dims(&self) -> Dims {
        Dims { inputs: self.fw.u_z.rows(), hidden: self.fw.u_z.cols(), classes: self.head_b.len() }
    }

    /// All tensors in [`TENSOR_NAMES`] order.
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut v: Vec<&[T]> = Vec::with_capacity(14);
        v.extend(self.fw.tensors());
        v.extend(self.bw.tensors());
        v.push(self.head_w.as_slice());
        v.push(&self.head_b);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut v: Vec<&mut [T]> = Vec::with_capacity(14);
        v.extend(self.fw.tensors_mut());
        v.extend(self.bw.tensors_mut());
        v.push(self.head_w.as_mut_slice());
        v.push(&mut self.head_b);
        v
    }

    pub fn tensor(&self, name: &str) -> Option<&[T]> {
        let i = TENSOR_NAMES.iter().position(|n| *n == name)?;
        Some(self.tensors()[i])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [T]> {
        let i = TENSOR_NAMES.iter().position(|n| *n == name)?;
        Some(self.tensors_mut().swap_remove(i))
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for t in self.tensors_mut() {
            for x in t {
                *x *= factor;
            }
        }
    }

    pub fn l2_norm(&self) -> T {
        self.tensors().iter().flat_map(|t| t.iter()).map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn cast<U: Scalar>(&self) -> GruParams<U> {
        let mut out = GruParams::<U>::zeros(self.dims());
        for (dst, src) in out.tensors_mut().into_iter().zip(self.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = U::of(s.to_f64_lossy());
            }
        }
        out
    }
}

fn glorot<T: Scalar>(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Matrix<T> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| T::of(rng.gen_range(-a..=a)))
}

/// Orthonormal square matrix: Q of a Gaussian matrix's QR factorization,
/// signed so that R has a positive diagonal.
pub fn random_orthogonal<T: Scalar>(rng: &mut ChaCha8Rng, n: usize) -> Matrix<T> {
    let mut cols: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect();
    // Modified Gram-Schmidt, run twice to recover orthogonality lost to
    // cancellation. The normalization keeps each R diagonal entry positive.
    for _ in 0..2 {
        for j in 0..n {
            for k in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let proj: f64 = done[k].iter().zip(&rest[0]).map(|(a, b)| a * b).sum();
                for (c, q) in rest[0].iter_mut().zip(&done[k]) {
                    *c -= proj * q;
                }
            }
            let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
            for c in &mut cols[j] {
                *c /= norm;
            }
        }
    }
    Matrix::from_fn(n, n, |i, j| T::of(cols[j][i]))
}

fn init_direction<T: Scalar>(rng: &mut ChaCha8Rng, inputs: usize, hidden: usize) -> GruDirection<T> {
    let u_z = glorot(rng, inputs, hidden, inputs, hidden);
    let u_r = glorot(rng, inputs, hidden, inputs, hidden);
    let u_h = glorot(rng, inputs, hidden, inputs, hidden);
    let w_z = random_orthogonal(rng, hidden);
    let w_r = random_orthogonal(rng, hidden);
    let w_h = random_orthogonal(rng, hidden);
    GruDirection { u_z, u_r, u_h, w_z, w_r, w_h }
}

/// Glorot-uniform head weights, zero bias.
pub fn init_head<T: Scalar>(rng_seed: u64, hidden: usize, classes: usize) -> (Matrix<T>, Vec<T>) {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (glorot(&mut rng, 2 * hidden, classes, 2 * hidden, classes), vec![T::zero(); classes])
}

/// Glorot-uniform input matrices, orthogonal recurrent matrices, Glorot head
/// with zero bias. Deterministic in `rng_seed`.
pub fn init_params<T: Scalar>(rng_seed: u64, dims: Dims) -> GruParams<T> {
    assert!(dims.inputs > 0 && dims.hidden > 0 && dims.classes > 0, "dimensions must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let fw = init_direction(&mut rng, dims.inputs, dims.hidden);
    let bw = init_direction(&mut rng, dims.inputs, dims.hidden);
    let head_w = glorot(&mut rng, 2 * dims.hidden, dims.classes, 2 * dims.hidden, dims.classes);
    GruParams { fw, bw, head_w, head_b: vec![T::zero(); dims.classes] }
}
