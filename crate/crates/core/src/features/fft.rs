//! Iterative radix-2 Cooley-Tukey transform for real input frames.

use num_complex::Complex;

use super::FeatureError;
use crate::scalar::Scalar;

/// Precomputed twiddles and bit-reversal table for one power-of-two length.
#[derive(Debug, Clone)]
pub struct RealFft<T> {
    len: usize,
    twiddles: Vec<Complex<T>>,
    bitrev: Vec<usize>,
}

impl<T: Scalar> RealFft<T> {
    pub fn new(len: usize) -> Result<Self, FeatureError> {
        if len < 2 || !len.is_power_of_two() {
            return Err(FeatureError::NotPowerOfTwo(len));
        }
        let bits = len.trailing_zeros();
        let bitrev = (0..len).map(|i| i.reverse_bits() >> (usize::BITS - bits)).collect();
        // Each twiddle is evaluated directly rather than by recurrence so the
        // error stays at a few ulps for every k.
        let twiddles = (0..len / 2)
            .map(|k| {
                let angle = -2.0 * std::f64::consts::PI * k as f64 / len as f64;
                Complex::new(T::of(angle.cos()), T::of(angle.sin()))
            })
            .collect();
        Ok(RealFft { len, twiddles, bitrev })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Full complex spectrum, `len` coefficients.
    pub fn full_spectrum(&self, frame: &[T]) -> Result<Vec<Complex<T>>, FeatureError> {
        if frame.len() != self.len {
            return Err(FeatureError::LengthMismatch { expected: self.len, got: frame.len() });
        }
        let mut buf: Vec<Complex<T>> = self.bitrev.iter().map(|&j| Complex::new(frame[j], T::zero())).collect();

        let mut size = 2;
        while size <= self.len {
            let half = size / 2;
            let stride = self.len / size;
            for start in (0..self.len).step_by(size) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            size *= 2;
        }
        Ok(buf)
    }

    /// One-sided spectrum: coefficients `0..=len/2`.
    pub fn process(&self, frame: &[T]) -> Result<Vec<Complex<T>>, FeatureError> {
        let mut full = self.full_spectrum(frame)?;
        full.truncate(self.len / 2 + 1);
        Ok(full)
    }
}

/// One-sided DFT of a power-of-two length frame.
pub fn dft<T: Scalar>(frame: &[T]) -> Result<Vec<Complex<T>>, FeatureError> {
    RealFft::new(frame.len())?.process(frame)
}

/// Parseval check between a frame and its one-sided spectrum:
/// `sum |x|^2 == (1/N) sum_full |X|^2` within `1e-6` relative.
pub fn frame_energy_check<T: Scalar>(frame: &[T], coefficients: &[Complex<T>]) -> bool {
    let n = frame.len();
    if n < 2 || coefficients.len() != n / 2 + 1 {
        return false;
    }
    let time: f64 = frame.iter().map(|x| x.to_f64_lossy().powi(2)).sum();
    let mag2 = |c: &Complex<T>| c.re.to_f64_lossy().powi(2) + c.im.to_f64_lossy().powi(2);
    // The two-sided spectrum mirrors bins 1..N/2-1; DC and Nyquist appear once.
    let interior: f64 = coefficients[1..n / 2].iter().map(mag2).sum();
    let freq = (mag2(&coefficients[0]) + mag2(&coefficients[n / 2]) + 2.0 * interior) / n as f64;
    let scale = time.abs().max(freq.abs());
    (time - freq).abs() <= 1e-6 * scale
}
