//! Least-squares fits of `log m = c - p log r - alpha s(x)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Minimal number of usable samples.
pub const MIN_SAMPLES: usize = 6;

/// Magnitude `value` at radius `r` and wake value `s`, with its error budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecaySample {
    pub r: f64,
    pub s: f64,
    pub value: f64,
    pub budget: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub r_min: f64,
    pub r_max: f64,
}

impl FitWindow {
    pub fn new(r_min: f64, r_max: f64) -> Result<Self> {
        if !(r_min > 0.0 && r_max >= r_min) {
            return Err(invalid("window", "need 0 < r_min <= r_max"));
        }
        Ok(Self { r_min, r_max })
    }

    fn contains(&self, r: f64) -> bool {
        r >= self.r_min * (1.0 - 1e-12) && r <= self.r_max * (1.0 + 1e-12)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFitReport {
    pub quantity: String,
    pub p: f64,
    pub alpha: f64,
    pub c: f64,
    pub residual_rms: f64,
    pub window: FitWindow,
    /// Largest error budget among the samples used.
    pub tail_budget: f64,
    /// False when `s` is constant over the window and `alpha` was absorbed into `c`.
    pub alpha_fitted: bool,
    pub samples_used: usize,
    pub samples_excluded: usize,
    /// Error budget of every sample inside the window.
    pub sample_budgets: Vec<f64>,
}

/// Fit over the samples inside `window`. Samples whose value is not above ten times
/// their budget (or not finite) are excluded and counted.
pub fn fit_decay(quantity: &str, samples: &[DecaySample], window: FitWindow) -> Result<DecayFitReport> {
    let inside: Vec<&DecaySample> = samples.iter().filter(|s| window.contains(s.r)).collect();
    let usable: Vec<&DecaySample> = inside
        .iter()
        .copied()
        .filter(|s| s.value.is_finite() && s.budget.is_finite() && s.r > 0.0 && s.value > 0.0 && s.value > 10.0 * s.budget)
        .collect();
    let excluded = inside.len() - usable.len();
    if usable.len() < MIN_SAMPLES {
        return Err(Error::Underdetermined { usable: usable.len(), excluded, needed: MIN_SAMPLES });
    }
    let n = usable.len() as f64;
    let lr: Vec<f64> = usable.iter().map(|s| s.r.ln()).collect();
    let y: Vec<f64> = usable.iter().map(|s| s.value.ln()).collect();
    let sv: Vec<f64> = usable.iter().map(|s| s.s).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let (ml, my, ms) = (mean(&lr), mean(&y), mean(&sv));
    let spread = |v: &[f64], m: f64| v.iter().map(|a| (a - m).abs()).fold(0.0, f64::max);
    if spread(&lr, ml) <= 1e-12 * ml.abs().max(1.0) {
        return Err(invalid("samples", "all samples share one radius"));
    }
    let alpha_fitted = spread(&sv, ms) > 1e-9 * ms.abs().max(1.0);
    let cols = if alpha_fitted { 2 } else { 1 };
    let a = DMatrix::from_fn(usable.len(), cols, |i, j| if j == 0 { -(lr[i] - ml) } else { -(sv[i] - ms) });
    let b = DVector::from_iterator(usable.len(), y.iter().map(|v| v - my));
    let sol = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-13)
        .map_err(|e| invalid("samples", e.to_string()))?;
    let p = sol[0];
    let alpha = if alpha_fitted { sol[1] } else { 0.0 };
    let c = my + p * ml + alpha * ms;
    let resid = (&a * &sol - &b).norm() / n.sqrt();
    Ok(DecayFitReport {
        quantity: quantity.to_string(),
        p,
        alpha,
        c,
        residual_rms: resid,
        window,
        tail_budget: usable.iter().map(|s| s.budget).fold(0.0, f64::max),
        alpha_fitted,
        samples_used: usable.len(),
        samples_excluded: excluded,
        sample_budgets: inside.iter().map(|s| s.budget).collect(),
    })
}
