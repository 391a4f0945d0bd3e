//! Wake geometry, the entire exponential integral and the `sqrt(-mu)` branch.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::geom::{norm, Vec3};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Switch point between the power series and `gamma + ln z + E1(z)` in [`ein`].
pub const EIN_SWITCH: f64 = 30.0;

/// Drift speed and period of the flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub lambda: f64,
    pub period: f64,
}

impl FlowParams {
    pub fn new(lambda: f64, period: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid("lambda", format!("must be positive and finite, got {lambda}")));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(invalid("period", format!("must be positive and finite, got {period}")));
        }
        Ok(Self { lambda, period })
    }

    /// `eta_k = 2 pi k / T`.
    pub fn mode_frequency(&self, k: i64) -> f64 {
        2.0 * PI * k as f64 / self.period
    }
}

/// Wake function `s(x) = |x| + x1`.
///
/// For `x1 < 0` the compensated form `(x2^2 + x3^2)/(|x| - x1)` avoids cancellation
/// inside the wake.
pub fn wake(x: &Vec3) -> f64 {
    let r = norm(x);
    if x[0] >= 0.0 {
        r + x[0]
    } else {
        (x[1] * x[1] + x[2] * x[2]) / (r - x[0])
    }
}

/// `Ein(z) = int_0^z (1 - e^{-t})/t dt` for `z >= 0`.
pub fn ein(z: f64) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(invalid("z", format!("ein requires z >= 0, got {z}")));
    }
    Ok(ein_unchecked(z))
}

pub(crate) fn ein_unchecked(z: f64) -> f64 {
    if z < EIN_SWITCH {
        ein_series(z)
    } else {
        EULER_GAMMA + z.ln() + exp1_cf(z)
    }
}

/// Positive-term series `Ein(z) = e^{-z} sum_{n>=1} z^n H_n / n!`.
fn ein_series(z: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    let mut term = 1.0; // z^n / n!
    let mut harmonic = 0.0;
    let mut sum = 0.0;
    for n in 1..400 {
        let nf = n as f64;
        term *= z / nf;
        harmonic += 1.0 / nf;
        let add = term * harmonic;
        sum += add;
        if nf > z && add < 1e-17 * sum {
            break;
        }
    }
    (-z).exp() * sum
}

/// Continued fraction for `E1(z)`, accurate for `z >= 1`.
fn exp1_cf(z: f64) -> f64 {
    // Modified Lentz on E1(z) = e^{-z} / (z + 1 - 1^2/(z + 3 - 2^2/(z + 5 - ...)))
    let tiny = 1e-300;
    let mut b = z + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-z).exp()
}

/// Exponential integral `E1(z)` for `z > 0`.
pub fn exp1(z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(invalid("z", format!("exp1 requires z > 0, got {z}")));
    }
    Ok(if z <= 1.0 {
        ein_series(z) - EULER_GAMMA - z.ln()
    } else {
        exp1_cf(z)
    })
}

/// `[Ein, Ein', Ein'', Ein''']` at `z >= 0`.
///
/// Below `z = 2` the derivatives come from the Taylor series, which removes the
/// `0/0` of the closed forms at the origin.
pub fn ein_derivatives(z: f64) -> [f64; 4] {
    let value = ein_unchecked(z);
    if z < 2.0 {
        // Ein'(z) = sum_{n>=0} (-1)^n z^n / (n+1)!
        let (mut d1, mut d2, mut d3) = (0.0, 0.0, 0.0);
        let mut fact = 1.0;
        for n in 0..40i32 {
            fact *= (n + 1) as f64;
            let c = (if n % 2 == 0 { 1.0 } else { -1.0 }) / fact;
            let nf = n as f64;
            d1 += c * z.powi(n);
            if n >= 1 {
                d2 += c * nf * z.powi(n - 1);
            }
            if n >= 2 {
                d3 += c * nf * (nf - 1.0) * z.powi(n - 2);
            }
        }
        [value, d1, d2, d3]
    } else {
        let e = (-z).exp();
        let d1 = (1.0 - e) / z;
        let d2 = (e * (1.0 + z) - 1.0) / (z * z);
        let d3 = (2.0 - e * (z * z + 2.0 * z + 2.0)) / (z * z * z);
        [value, d1, d2, d3]
    }
}

/// The root `w` of `w^2 = -(lambda^2/4 + i eta)` with `Im w > lambda/2 >= 0`.
pub fn sqrt_neg_mu(eta: f64, lambda: f64) -> Result<Complex64> {
    if eta == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    if !(lambda > 0.0) {
        return Err(invalid("lambda", format!("must be positive, got {lambda}")));
    }
    if !eta.is_finite() {
        return Err(invalid("eta", "must be finite"));
    }
    Ok(sqrt_neg_mu_unchecked(eta, lambda))
}

pub(crate) fn sqrt_neg_mu_unchecked(eta: f64, lambda: f64) -> Complex64 {
    // -mu = a + i b with a = -lambda^2/4 < 0, b = -eta.
    let a = -0.25 * lambda * lambda;
    let b = -eta;
    let modulus = a.hypot(b);
    let im = (0.5 * (modulus - a)).sqrt();
    Complex64::new(b / (2.0 * im), im)
}

/// `d sqrt(-mu) / d eta = -i / (2 sqrt(-mu))`.
pub fn d_sqrt_neg_mu_d_eta(w: Complex64) -> Complex64 {
    -Complex64::i() / (2.0 * w)
}

/// `Im sqrt(-mu) - lambda/2`, computed without cancellation.
pub fn decay_gap(eta: f64, lambda: f64) -> f64 {
    let q = 0.25 * lambda * lambda;
    let modulus = q.hypot(eta);
    let im = (0.5 * (modulus + q)).sqrt();
    eta * eta / (2.0 * (modulus + q) * (im + 0.5 * lambda))
}

/// Lower bound `C4` with `Im sqrt(-mu) - lambda/2 >= C4 sqrt|eta|` for `|eta| >= eta0`.
///
/// Scans a geometric grid over `[eta0, 1e6 eta0]` and refines the bracket around the
/// smallest grid value with a golden-section search.
pub fn c4_constant(lambda: f64, eta0: f64) -> f64 {
    let ratio = |eta: f64| decay_gap(eta, lambda) / eta.sqrt();
    let n = 4001;
    let (lo, hi) = (eta0.ln(), (1e6 * eta0).ln());
    let step = (hi - lo) / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|i| ratio((lo + step * i as f64).exp())).collect();
    let (imin, vmin) = grid
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let a = lo + step * imin.saturating_sub(1) as f64;
    let b = lo + step * (imin + 1).min(n - 1) as f64;
    let refined = golden_min(|t| ratio(t.exp()), a, b, 1e-13);
    vmin.min(refined)
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = f(a).min(f(b)).min(fc).min(fd);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        best = best.min(fc).min(fd);
    }
    best
}
