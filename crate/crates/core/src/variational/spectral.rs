//! Fourier multipliers on 1-periodic sample sequences.
//!
//! A path is packed as `x + i y` so one complex FFT handles both
//! coordinates. Every multiplier used here is Hermitian-symmetric in the
//! mode number, which makes the operator real and keeps the two
//! coordinates separate.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Spectral {
    k: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Spectral {
    /// Shared plan for `k` samples.
    pub(crate) fn get(k: usize) -> Arc<Spectral> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Spectral>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
        map.entry(k)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Arc::new(Spectral { k, fwd: planner.plan_fft_forward(k), inv: planner.plan_fft_inverse(k) })
            })
            .clone()
    }

    /// Signed mode number of FFT bin `idx`, in `[-K/2, K/2)`.
    pub(crate) fn mode(&self, idx: usize) -> i64 {
        if idx < self.k / 2 {
            idx as i64
        } else {
            idx as i64 - self.k as i64
        }
    }

    pub(crate) fn is_nyquist(&self, idx: usize) -> bool {
        self.k % 2 == 0 && idx == self.k / 2
    }

    pub(crate) fn forward(&self, samples: &[[f64; 2]]) -> Vec<Complex64> {
        debug_assert_eq!(samples.len(), self.k);
        let mut buf: Vec<Complex64> = samples.iter().map(|p| Complex64::new(p[0], p[1])).collect();
        self.fwd.process(&mut buf);
        buf
    }

    pub(crate) fn inverse(&self, mut buf: Vec<Complex64>) -> Vec<[f64; 2]> {
        self.inv.process(&mut buf);
        let s = 1.0 / self.k as f64;
        buf.iter().map(|c| [c.re * s, c.im * s]).collect()
    }

    /// Multiplier of the `order`-th derivative at bin `idx`.
    pub(crate) fn derivative_multiplier(&self, idx: usize, order: u32) -> Complex64 {
        if order % 2 == 1 && self.is_nyquist(idx) {
            return Complex64::new(0.0, 0.0);
        }
        let w = TAU * self.mode(idx) as f64;
        Complex64::new(0.0, w).powu(order)
    }

    /// Multiplier of the Gram operator of the H2 inner product,
    /// `1 + |d1|^2 + |d2|^2` per mode.
    pub(crate) fn h2_weight(&self, idx: usize) -> f64 {
        1.0 + self.derivative_multiplier(idx, 1).norm_sqr() + self.derivative_multiplier(idx, 2).norm_sqr()
    }

    pub(crate) fn apply(&self, samples: &[[f64; 2]], mult: impl Fn(usize) -> Complex64) -> Vec<[f64; 2]> {
        let mut spec = self.forward(samples);
        for (idx, c) in spec.iter_mut().enumerate() {
            *c *= mult(idx);
        }
        self.inverse(spec)
    }

    pub(crate) fn derivative(&self, samples: &[[f64; 2]], order: u32) -> Vec<[f64; 2]> {
        if order == 0 {
            return samples.to_vec();
        }
        self.apply(samples, |idx| self.derivative_multiplier(idx, order))
    }
}

/// Trigonometric interpolation of `samples` onto `new_k` uniform points.
pub(crate) fn resample(samples: &[[f64; 2]], new_k: usize) -> Vec<[f64; 2]> {
    let k = samples.len();
    if new_k == k {
        return samples.to_vec();
    }
    let src = Spectral::get(k);
    let dst = Spectral::get(new_k);
    let spec = src.forward(samples);
    let mut out = vec![Complex64::new(0.0, 0.0); new_k];
    let scale = new_k as f64 / k as f64;
    for (idx, &c) in spec.iter().enumerate() {
        let m = src.mode(idx);
        if src.is_nyquist(idx) && new_k > k {
            // split the old Nyquist mode evenly between +K/2 and -K/2
            let half = c * (0.5 * scale);
            out[(m.rem_euclid(new_k as i64)) as usize] += half;
            out[((-m).rem_euclid(new_k as i64)) as usize] += half;
            continue;
        }
        let limit = new_k as i64 / 2;
        if m >= -limit && m <= limit {
            let target = m.rem_euclid(new_k as i64) as usize;
            out[target] += c * scale;
        }
    }
    dst.inverse(out)
}
