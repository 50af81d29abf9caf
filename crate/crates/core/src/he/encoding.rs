//! Canonical-embedding encoder: `n/2` complex slots ↔ a real polynomial of
//! degree `< n`, evaluated at the primitive `2n`-th roots `ζ^(5^j)`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::Plaintext;
use crate::error::{Error, Result};

/// Coefficients beyond this magnitude cannot be represented in a plaintext.
const COEFF_LIMIT: f64 = (1u64 << 62) as f64;

#[derive(Clone)]
pub(crate) struct Encoder {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `5^j mod 2n` for each slot `j`.
    rotation_index: Vec<usize>,
}

impl std::fmt::Debug for Encoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Encoder").field("n", &self.n).finish()
    }
}

impl Encoder {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let two_n = 2 * n;
        let mut rotation_index = Vec::with_capacity(n / 2);
        let mut k = 1usize;
        for _ in 0..n / 2 {
            rotation_index.push(k);
            k = (k * 5) % two_n;
        }
        Self {
            n,
            forward: planner.plan_fft_forward(two_n),
            inverse: planner.plan_fft_inverse(two_n),
            rotation_index,
        }
    }

    pub fn slots(&self) -> usize {
        self.n / 2
    }

    pub fn encode(&self, z: &[Complex64], scale: f64) -> Result<Plaintext> {
        if z.len() > self.slots() {
            return Err(Error::Capacity(format!(
                "{} values exceed the {} slots of a degree-{} ring",
                z.len(),
                self.slots(),
                self.n
            )));
        }
        let two_n = 2 * self.n;
        let mut spectrum = vec![Complex64::new(0.0, 0.0); two_n];
        for (j, &k) in self.rotation_index.iter().enumerate() {
            let value = z.get(j).copied().unwrap_or_default();
            spectrum[k] = value;
            spectrum[two_n - k] = value.conj();
        }
        self.forward.process(&mut spectrum);
        let factor = scale / self.n as f64;
        let coeffs = spectrum[..self.n]
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let v = (c.re * factor).round();
                if !(v.abs() < COEFF_LIMIT) {
                    return Err(Error::Capacity(format!(
                        "encoded coefficient {i} ({v:e}) overflows at scale {scale:e}"
                    )));
                }
                Ok(v as i64)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Plaintext { coeffs, scale })
    }

    pub fn decode(&self, pt: &Plaintext) -> Vec<Complex64> {
        let mut values = vec![Complex64::new(0.0, 0.0); 2 * self.n];
        for (v, &c) in values.iter_mut().zip(&pt.coeffs) {
            v.re = c as f64;
        }
        self.inverse.process(&mut values);
        self.rotation_index.iter().map(|&k| values[k] / pt.scale).collect()
    }
}
