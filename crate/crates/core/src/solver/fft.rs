//! Cubic 3D FFT built from 1D transforms.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Fft3 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    pub(crate) fn new(n: usize) -> Self {
        let mut p = FftPlanner::new();
        Self { n, fwd: p.plan_fft_forward(n), inv: p.plan_fft_inverse(n) }
    }

    /// Unnormalised in-place transform of `n^3` values stored x1-fastest.
    pub(crate) fn process(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        debug_assert_eq!(data.len(), n * n * n);
        let plan = if inverse { &self.inv } else { &self.fwd };
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        let mut line = vec![Complex64::default(); n];
        // axis 2 (stride n)
        for i3 in 0..n {
            let base = i3 * n * n;
            for i1 in 0..n {
                for (i2, v) in line.iter_mut().enumerate() {
                    *v = data[base + i1 + n * i2];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (i2, v) in line.iter().enumerate() {
                    data[base + i1 + n * i2] = *v;
                }
            }
        }
        // axis 3 (stride n^2)
        let nn = n * n;
        for j in 0..nn {
            for (i3, v) in line.iter_mut().enumerate() {
                *v = data[j + nn * i3];
            }
            plan.process_with_scratch(&mut line, &mut scratch);
            for (i3, v) in line.iter().enumerate() {
                data[j + nn * i3] = *v;
            }
        }
    }
}
