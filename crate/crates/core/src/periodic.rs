//! Purely periodic kernels.
//!
//! Each temporal mode `k != 0` of the time-periodic Oseen problem is governed by the
//! Helmholtz-with-drift kernel `Gamma_H(x) = exp(i w |x| - lambda x1 / 2)/(4 pi |x|)`,
//! `w = sqrt(-(lambda^2/4 + i eta))`. The purely periodic vorticity kernel is the mode
//! series `phi_perp(t, x) = sum_{k != 0} e^{i eta_k t} Gamma_H^{eta_k}(x)`, truncated
//! with a certified tail bound.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{invalid, Error, Result};
use crate::geom::{norm, pairwise_sum, smoothstep5, CMat3, CTensor333, CVec3, Vec3};
use crate::special::{c4_constant, d_sqrt_neg_mu_d_eta, sqrt_neg_mu, sqrt_neg_mu_unchecked, FlowParams};
use crate::steady::grad_phi0_unchecked;

const CZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Kernel `exp(beta |x| + drift x1) / (4 pi |x|)` with complex `beta`.
///
/// `Gamma_H` has `beta = i w`, `drift = -lambda/2`; the Newton kernel has both zero.
#[derive(Debug, Clone, Copy)]
pub struct ExpKernel {
    pub beta: Complex64,
    pub drift: f64,
}

struct RadialJet {
    n: Vec3,
    r: f64,
    f: [Complex64; 4],
}

impl ExpKernel {
    pub fn newton() -> Self {
        Self { beta: CZERO, drift: 0.0 }
    }

    pub fn helmholtz(eta: f64, lambda: f64) -> Self {
        let w = sqrt_neg_mu_unchecked(eta, lambda);
        Self { beta: Complex64::i() * w, drift: -0.5 * lambda }
    }

    /// Radial derivatives of `F(r) = e^{beta r}/r`, each multiplied by `e^{drift x1}/(4 pi)`.
    fn jet(&self, x: &Vec3, order: usize) -> RadialJet {
        let r = norm(x);
        let inv = 1.0 / r;
        let n = [x[0] * inv, x[1] * inv, x[2] * inv];
        let b = self.beta;
        let base = (b * r + self.drift * x[0]).exp() * (inv / (4.0 * PI));
        let mut f = [base, CZERO, CZERO, CZERO];
        if order >= 1 {
            f[1] = base * (b - inv);
        }
        if order >= 2 {
            f[2] = base * (b * b - 2.0 * b * inv + 2.0 * inv * inv);
        }
        if order >= 3 {
            f[3] = base * (b * b * b - 3.0 * b * b * inv + 6.0 * b * inv * inv - 6.0 * inv * inv * inv);
        }
        RadialJet { n, r, f }
    }

    pub fn value(&self, x: &Vec3) -> Complex64 {
        self.jet(x, 0).f[0]
    }

    pub fn gradient(&self, x: &Vec3) -> CVec3 {
        let j = self.jet(x, 1);
        let mut g = [j.f[1] * j.n[0], j.f[1] * j.n[1], j.f[1] * j.n[2]];
        g[0] += self.drift * j.f[0];
        g
    }

    pub fn hessian(&self, x: &Vec3) -> CMat3 {
        let j = self.jet(x, 2);
        let (f0, f1, f2) = (j.f[0], j.f[1], j.f[2]);
        let c = self.drift;
        let a = f2 - f1 / j.r;
        let b = f1 / j.r;
        let mut h = [[CZERO; 3]; 3];
        for p in 0..3 {
            for q in 0..3 {
                h[p][q] = a * (j.n[p] * j.n[q]) + if p == q { b } else { CZERO };
            }
        }
        // Leibniz with e^{c x1}: c (e1 (x) dF + dF (x) e1) + c^2 e1 (x) e1 F
        for q in 0..3 {
            h[0][q] += c * f1 * j.n[q];
            h[q][0] += c * f1 * j.n[q];
        }
        h[0][0] += c * c * f0;
        h
    }

    /// Third derivatives, indexed `[m][j][l]`.
    pub fn third(&self, x: &Vec3) -> CTensor333 {
        let jt = self.jet(x, 3);
        let (f0, f1, f2, f3) = (jt.f[0], jt.f[1], jt.f[2], jt.f[3]);
        let r = jt.r;
        let n = jt.n;
        let c = self.drift;
        let a3 = f3 - 3.0 * f2 / r + 3.0 * f1 / (r * r);
        let b3 = f2 / r - f1 / (r * r);
        let a2 = f2 - f1 / r;
        let b2 = f1 / r;
        let d = |i: usize, k: usize| if i == k { 1.0 } else { 0.0 };
        let grad = |i: usize| f1 * n[i];
        let hess = |i: usize, k: usize| a2 * (n[i] * n[k]) + b2 * d(i, k);
        let mut t = [[[CZERO; 3]; 3]; 3];
        for m in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    let mut v = a3 * (n[m] * n[j] * n[l])
                        + b3 * (d(j, l) * n[m] + d(j, m) * n[l] + d(l, m) * n[j]);
                    v += c * (d(m, 0) * hess(j, l) + d(j, 0) * hess(m, l) + d(l, 0) * hess(m, j));
                    v += c * c * (d(m, 0) * d(j, 0) * grad(l) + d(m, 0) * d(l, 0) * grad(j) + d(j, 0) * d(l, 0) * grad(m));
                    v += c * c * c * d(m, 0) * d(j, 0) * d(l, 0) * f0;
                    t[m][j][l] = v;
                }
            }
        }
        t
    }
}

fn check_point(x: &Vec3) -> Result<()> {
    let r = norm(x);
    if r == 0.0 || !r.is_finite() {
        return Err(Error::Singular);
    }
    Ok(())
}

fn check_eta(eta: f64) -> Result<()> {
    if eta == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    Ok(())
}

/// `Gamma_H^{eta}(x)`.
pub fn gamma_h(x: &Vec3, eta: f64, params: &FlowParams) -> Result<Complex64> {
    check_point(x)?;
    check_eta(eta)?;
    sqrt_neg_mu(eta, params.lambda)?;
    Ok(ExpKernel::helmholtz(eta, params.lambda).value(x))
}

/// Gradient of `Gamma_H^{eta}`.
pub fn grad_gamma_h(x: &Vec3, eta: f64, params: &FlowParams) -> Result<CVec3> {
    check_point(x)?;
    check_eta(eta)?;
    Ok(ExpKernel::helmholtz(eta, params.lambda).gradient(x))
}

/// Hessian of `Gamma_H^{eta}`.
pub fn hessian_gamma_h(x: &Vec3, eta: f64, params: &FlowParams) -> Result<CMat3> {
    check_point(x)?;
    check_eta(eta)?;
    Ok(ExpKernel::helmholtz(eta, params.lambda).hessian(x))
}

/// Truncation control for mode series.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Truncation {
    pub tol: f64,
    pub k_hard: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { tol: 1e-10, k_hard: 1_000_000 }
    }
}

/// Number of retained modes and the bound on everything discarded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncationCertificate {
    pub k_used: usize,
    pub tail_bound: f64,
    pub basis: String,
    /// Imaginary part of the partial sum before it was discarded.
    pub imag_residual: f64,
}

fn c4_for(params: &FlowParams) -> f64 {
    c4_constant(params.lambda, 2.0 * PI / params.period)
}

/// Tail bound for `phi_perp`: `sum_{|k|>K} e^{-C4 sqrt(2 pi |k|/T) |x|}/(4 pi |x|)`,
/// summed by comparison with `int_K^inf e^{-a sqrt(u)} du`.
pub fn phi_perp_tail_bound(r: f64, params: &FlowParams, k: usize, c4: f64) -> f64 {
    let a = c4 * (2.0 * PI / params.period).sqrt() * r;
    let v = (k as f64).sqrt();
    let integral = 2.0 / (a * a) * (1.0 + a * v) * (-a * v).exp();
    2.0 * integral / (4.0 * PI * r)
}

/// Tail bound for `grad phi_perp` from `|grad Gamma_H| <= |Gamma_H| (1/|x| + lambda + sqrt|eta|)`.
pub fn grad_phi_perp_tail_bound(r: f64, params: &FlowParams, k: usize, c4: f64) -> f64 {
    let omega = 2.0 * PI / params.period;
    let a = c4 * omega.sqrt() * r;
    let big_a = 1.0 / r + params.lambda;
    let big_b = omega.sqrt();
    // summand (A + B v) e^{-a v} with v = sqrt(k) is decreasing for v > 1/a - A/B
    let v_mono = (1.0 / a - big_a / big_b).max(0.0);
    let v = (k as f64).sqrt();
    if v < v_mono {
        return f64::INFINITY;
    }
    let e = (-a * v).exp();
    let i1 = e * (v / a + 1.0 / (a * a));
    let i2 = e * (v * v / a + 2.0 * v / (a * a) + 2.0 / (a * a * a));
    2.0 * (2.0 * big_a * i1 + 2.0 * big_b * i2) / (4.0 * PI * r)
}

fn choose_k(bound: impl Fn(usize) -> f64, trunc: &Truncation) -> Result<(usize, f64)> {
    if !(trunc.tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let mut hi = 1usize;
    while bound(hi) > trunc.tol {
        if hi >= trunc.k_hard {
            return Err(Error::Truncation { tol: trunc.tol, k_hard: trunc.k_hard, tail: bound(trunc.k_hard) });
        }
        hi = (hi * 2).min(trunc.k_hard);
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if bound(mid) <= trunc.tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if lo >= 1 && bound(lo) <= trunc.tol {
        hi = lo;
    }
    Ok((hi, bound(hi)))
}

/// Sum `sum_{k=1}^{K} (term(k) + term(-k))` with a fixed reduction tree.
fn mode_pair_sum<const N: usize, F>(k_max: usize, term: F) -> [Complex64; N]
where
    F: Fn(i64) -> [Complex64; N] + Sync,
{
    let terms: Vec<[Complex64; N]> = (1..=k_max as i64)
        .into_par_iter()
        .map(|k| {
            let a = term(k);
            let b = term(-k);
            let mut out = [CZERO; N];
            for i in 0..N {
                out[i] = a[i] + b[i];
            }
            out
        })
        .collect();
    pairwise_sum(&terms, [CZERO; N], &|a, b| {
        let mut out = a;
        for i in 0..N {
            out[i] += b[i];
        }
        out
    })
}

/// `phi_perp` with exactly `k_max` mode pairs, returned as a complex number.
pub fn phi_perp_fixed(t: f64, x: &Vec3, params: &FlowParams, k_max: usize) -> Complex64 {
    let lam = params.lambda;
    mode_pair_sum::<1, _>(k_max, |k| {
        let eta = params.mode_frequency(k);
        [Complex64::from_polar(1.0, eta * t) * ExpKernel::helmholtz(eta, lam).value(x)]
    })[0]
}

/// `grad phi_perp` with exactly `k_max` mode pairs.
pub fn grad_phi_perp_fixed(t: f64, x: &Vec3, params: &FlowParams, k_max: usize) -> CVec3 {
    let lam = params.lambda;
    mode_pair_sum::<3, _>(k_max, |k| {
        let eta = params.mode_frequency(k);
        let ph = Complex64::from_polar(1.0, eta * t);
        let g = ExpKernel::helmholtz(eta, lam).gradient(x);
        [ph * g[0], ph * g[1], ph * g[2]]
    })
}

/// Purely periodic vorticity kernel `phi_perp(t, x)` with a certified truncation.
pub fn phi_perp(t: f64, x: &Vec3, params: &FlowParams, trunc: &Truncation) -> Result<(f64, TruncationCertificate)> {
    check_point(x)?;
    let r = norm(x);
    let c4 = c4_for(params);
    let (k, tail) = choose_k(|k| phi_perp_tail_bound(r, params, k, c4), trunc)?;
    let v = phi_perp_fixed(t, x, params, k);
    Ok((
        v.re,
        TruncationCertificate {
            k_used: k,
            tail_bound: tail,
            basis: "|Gamma_H| <= exp(-C4 sqrt|eta| |x|)/(4 pi |x|), integral comparison".into(),
            imag_residual: v.im,
        },
    ))
}

/// Gradient of `phi_perp` with a certified truncation.
pub fn grad_phi_perp(t: f64, x: &Vec3, params: &FlowParams, trunc: &Truncation) -> Result<(Vec3, TruncationCertificate)> {
    check_point(x)?;
    let r = norm(x);
    let c4 = c4_for(params);
    let (k, tail) = choose_k(|k| grad_phi_perp_tail_bound(r, params, k, c4), trunc)?;
    let g = grad_phi_perp_fixed(t, x, params, k);
    let imag = (g[0].im.powi(2) + g[1].im.powi(2) + g[2].im.powi(2)).sqrt();
    Ok((
        [g[0].re, g[1].re, g[2].re],
        TruncationCertificate {
            k_used: k,
            tail_bound: tail,
            basis: "|grad Gamma_H| <= (1/|x| + lambda + sqrt|eta|) exp(-C4 sqrt|eta| |x|)/(4 pi |x|), integral comparison".into(),
            imag_residual: imag,
        },
    ))
}

/// Kernels admitted by [`lq_time_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeKernel {
    PhiPerp,
    GradPhiPerp,
}

/// `(1/T int_0^T |kernel(t, x)|^q dt)^{1/q}` by the trapezoidal rule, doubled until
/// the relative change is at most `1e-6`.
pub fn lq_time_norm(kernel: TimeKernel, x: &Vec3, q: f64, params: &FlowParams, trunc: &Truncation) -> Result<f64> {
    check_point(x)?;
    if !(q >= 1.0) {
        return Err(invalid("q", format!("must be >= 1, got {q}")));
    }
    let r = norm(x);
    let c4 = c4_for(params);
    let lam = params.lambda;
    let (k, _) = match kernel {
        TimeKernel::PhiPerp => choose_k(|k| phi_perp_tail_bound(r, params, k, c4), trunc)?,
        TimeKernel::GradPhiPerp => choose_k(|k| grad_phi_perp_tail_bound(r, params, k, c4), trunc)?,
    };
    // mode coefficients for k = 1..K; negative modes are their conjugates
    let modes: Vec<CVec3> = (1..=k as i64)
        .map(|kk| {
            let ker = ExpKernel::helmholtz(params.mode_frequency(kk), lam);
            match kernel {
                TimeKernel::PhiPerp => [ker.value(x), CZERO, CZERO],
                TimeKernel::GradPhiPerp => ker.gradient(x),
            }
        })
        .collect();
    let omega = 2.0 * PI / params.period;
    let magnitude = |t: f64| -> f64 {
        let mut v = [0.0f64; 3];
        for (i, m) in modes.iter().enumerate() {
            let ph = Complex64::from_polar(1.0, omega * (i + 1) as f64 * t);
            for c in 0..3 {
                v[c] += 2.0 * (ph * m[c]).re;
            }
        }
        (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
    };
    let mean = |m: usize| -> f64 {
        let vals: Vec<f64> = (0..m)
            .into_par_iter()
            .map(|i| magnitude(params.period * i as f64 / m as f64).powf(q))
            .collect();
        vals.iter().sum::<f64>() / m as f64
    };
    let mut m = (4 * k + 4).next_power_of_two().max(64);
    let mut prev = mean(m).powf(1.0 / q);
    loop {
        m *= 2;
        let cur = mean(m).powf(1.0 / q);
        if (cur - prev).abs() <= 1e-6 * cur.abs() || m >= 1 << 22 {
            return Ok(cur);
        }
        prev = cur;
    }
}

/// Multiplier diagnostic order: `m` itself or one spatial derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierOrder {
    Zero,
    Derivative(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiplierReport {
    pub x: Vec3,
    pub gamma: f64,
    pub order: MultiplierOrder,
    /// `sup (|m| + |eta d_eta m|)` over the grid.
    pub sup: f64,
    pub eta_at_sup: f64,
    pub c5: f64,
    /// `sup |x|^{1 + |a| + 2 gamma} e^{C5 |x|}`.
    pub normalized: f64,
}

/// Cutoff `chi` for the multiplier: 0 on `|eta| <= 1/2`, 1 on `|eta| >= 1`.
pub fn multiplier_cutoff(eta: f64) -> (f64, f64) {
    let (v, dv) = smoothstep5(2.0 * (eta.abs() - 0.5));
    (v, 2.0 * dv * eta.signum())
}

/// `m(eta) = chi(eta) |eta|^gamma D^a Gamma_H^{2 pi eta / T}(x)` and `eta d_eta m`.
pub fn multiplier_value(order: MultiplierOrder, x: &Vec3, gamma: f64, params: &FlowParams, eta: f64) -> (Complex64, Complex64) {
    let (chi, dchi) = multiplier_cutoff(eta);
    if chi == 0.0 && dchi == 0.0 {
        return (CZERO, CZERO);
    }
    let lam = params.lambda;
    let omega = 2.0 * PI / params.period;
    let eff = omega * eta;
    let w = sqrt_neg_mu_unchecked(eff, lam);
    let dw = d_sqrt_neg_mu_d_eta(w) * omega;
    let ker = ExpKernel::helmholtz(eff, lam);
    let r = norm(x);
    let g = ker.value(x);
    let dg = Complex64::i() * r * g * dw;
    let (d, dd) = match order {
        MultiplierOrder::Zero => (g, dg),
        MultiplierOrder::Derivative(j) => {
            let nj = x[j] / r;
            let extra = if j == 0 { ker.drift } else { 0.0 };
            let f = nj * (Complex64::i() * w - 1.0 / r) + extra;
            (g * f, dg * f + g * Complex64::i() * nj * dw)
        }
    };
    let pw = eta.abs().powf(gamma);
    let m = chi * pw * d;
    let eta_dm = eta * dchi * pw * d + gamma * chi * pw * d + chi * pw * eta * dd;
    (m, eta_dm)
}

/// Sup of `|m| + |eta d_eta m|` over a log-spaced grid of `|eta| in [1/2, 1e4]`, both signs.
pub fn multiplier_diag(order: MultiplierOrder, x: &Vec3, gamma: f64, params: &FlowParams) -> Result<MultiplierReport> {
    check_point(x)?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid("gamma", "must lie in (0, 1)"));
    }
    if let MultiplierOrder::Derivative(j) = order {
        if j > 2 {
            return Err(invalid("order", "derivative index must be 0, 1 or 2"));
        }
    }
    let n = 6000;
    let (lo, hi) = (0.5f64.ln(), 1e4f64.ln());
    let mut best = (0.0, 0.0);
    for i in 0..n {
        let mag = (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp();
        for eta in [mag, -mag] {
            let (m, em) = multiplier_value(order, x, gamma, params, eta);
            let v = m.norm() + em.norm();
            if v > best.0 {
                best = (v, eta);
            }
        }
    }
    let c5 = ConstantsRecord::new(params).c5;
    let r = norm(x);
    let deriv = if order == MultiplierOrder::Zero { 0.0 } else { 1.0 };
    let normalized = best.0 * r.powf(1.0 + deriv + 2.0 * gamma) * (c5 * r).exp();
    Ok(MultiplierReport { x: *x, gamma, order, sup: best.0, eta_at_sup: best.1, c5, normalized })
}

/// `C4`, `C5 = sqrt(pi/T) C4 / 2`, the adopted `C3 = C5` and `K = min(lambda, C3)/4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsRecord {
    pub c4: f64,
    pub c5: f64,
    pub c3: f64,
    pub k: f64,
}

impl ConstantsRecord {
    pub fn new(params: &FlowParams) -> Self {
        let c4 = c4_for(params);
        let c5 = (PI / params.period).sqrt() * c4 / 2.0;
        let c3 = c5;
        Self { c4, c5, c3, k: params.lambda.min(c3) / 4.0 }
    }
}

fn gl(n: usize) -> &'static [(f64, f64)] {
    static RULES: OnceLock<Vec<Vec<(f64, f64)>>> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        (0..=32)
            .map(|k| {
                if k == 0 {
                    Vec::new()
                } else {
                    GaussLegendre::new(k.try_into().unwrap()).as_node_weight_pairs().to_vec()
                }
            })
            .collect()
    });
    &rules[n]
}

/// `int_0^inf e^{-i beta u} G(u) du` along a ray whose distance to the origin at
/// parameter `u` is `dist(u)`. `G'` (if supplied) feeds a second integration-by-parts
/// term for the tail beyond the cut.
fn oscillatory_ray<const N: usize>(
    beta: f64,
    dist: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> [Complex64; N] + Sync,
    gp: Option<&(dyn Fn(f64) -> [Complex64; N] + Sync)>,
    reach: f64,
) -> ([Complex64; N], f64) {
    let period_quarter = 0.5 * PI / beta.abs();
    let mut edges = vec![0.0];
    let mut u = 0.0;
    while u < reach {
        let len = (0.5 * dist(u)).min(period_quarter);
        u += len;
        edges.push(u);
    }
    let u_max = u;
    let panel = |order: usize| -> [Complex64; N] {
        let parts: Vec<[Complex64; N]> = edges
            .par_windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
                let mut acc = [CZERO; N];
                for &(t, wt) in gl(order) {
                    let uu = mid + half * t;
                    let ph = Complex64::from_polar(wt * half, -beta * uu);
                    let v = g(uu);
                    for i in 0..N {
                        acc[i] += ph * v[i];
                    }
                }
                acc
            })
            .collect();
        pairwise_sum(&parts, [CZERO; N], &|a, b| {
            let mut o = a;
            for i in 0..N {
                o[i] += b[i];
            }
            o
        })
    };
    let fine = panel(12);
    let coarse = panel(8);
    let ib = Complex64::new(0.0, beta);
    let ph = Complex64::from_polar(1.0, -beta * u_max);
    let gu = g(u_max);
    let mut tail = [CZERO; N];
    let mut tail_err = 0.0;
    for i in 0..N {
        tail[i] = ph * gu[i] / ib;
    }
    if let Some(gp) = gp {
        let gpu = gp(u_max);
        for i in 0..N {
            tail[i] += ph * gpu[i] / (ib * ib);
            tail_err += (gpu[i] / (ib * ib)).norm() * 4.0 / (beta.abs() * dist(u_max));
        }
    } else {
        for i in 0..N {
            tail_err += (gu[i] / ib).norm() * 4.0 / (beta.abs() * dist(u_max));
        }
    }
    let mut out = [CZERO; N];
    let mut quad_err = 0.0f64;
    for i in 0..N {
        out[i] = fine[i] + tail[i];
        quad_err = quad_err.max((fine[i] - coarse[i]).norm());
    }
    (out, quad_err + tail_err)
}

fn ray_setup(x: &Vec3, eta: f64, lambda: f64) -> (f64, f64, f64) {
    // (side, beta, prefactor): the ray runs upstream for x1 >= 0 and downstream otherwise
    let side = if x[0] >= 0.0 { 1.0 } else { -1.0 };
    let kappa = eta / lambda;
    (side, side * kappa, side / lambda)
}

/// Per-mode velocity kernel `Gamma_perp^{(k)} = delta Gamma_H + dd Psi` with
/// `Psi = N * Gamma_H`, together with an error estimate.
///
/// `Psi` solves `(i eta - lambda d1) Psi = N - Gamma_H`, so its Hessian is the ray
/// integral `(1/lambda) int_0^inf e^{-i eta u/lambda} dd(N - Gamma_H)(x + u e1) du`
/// (mirrored downstream for `x1 < 0`).
pub fn gamma_perp_mode(k: i64, x: &Vec3, params: &FlowParams, tol: f64) -> Result<(CMat3, f64)> {
    check_point(x)?;
    if k == 0 {
        return Err(Error::ZeroFrequency);
    }
    let eta = params.mode_frequency(k);
    let lam = params.lambda;
    let gh = ExpKernel::helmholtz(eta, lam);
    let newton = ExpKernel::newton();
    let (side, beta, pref) = ray_setup(x, eta, lam);
    let r = norm(x);
    let at = |u: f64| [x[0] + side * u, x[1], x[2]];
    let dist = |u: f64| norm(&at(u));
    let flat = |m: CMat3| {
        let mut o = [CZERO; 9];
        for j in 0..3 {
            for l in 0..3 {
                o[3 * j + l] = m[j][l];
            }
        }
        o
    };
    let g = |u: f64| {
        let y = at(u);
        let (a, b) = (newton.hessian(&y), gh.hessian(&y));
        let mut d = [[CZERO; 3]; 3];
        for j in 0..3 {
            for l in 0..3 {
                d[j][l] = a[j][l] - b[j][l];
            }
        }
        flat(d)
    };
    let gp = |u: f64| {
        let y = at(u);
        let (a, b) = (newton.third(&y), gh.third(&y));
        let mut d = [[CZERO; 3]; 3];
        for j in 0..3 {
            for l in 0..3 {
                d[j][l] = side * (a[0][j][l] - b[0][j][l]);
            }
        }
        flat(d)
    };
    let reach = reach_for(r, beta, tol);
    let (v, err) = oscillatory_ray::<9>(beta, dist, g, Some(&gp), reach);
    let h = gh.value(x);
    let mut out = [[CZERO; 3]; 3];
    for j in 0..3 {
        for l in 0..3 {
            out[j][l] = pref * v[3 * j + l] + if j == l { h } else { CZERO };
        }
    }
    let err = err / lam;
    let scale = crate::geom::cmat_norm(&out);
    if err > tol.max(1e-300) * scale.max(1e-300) * 1e3 {
        return Err(Error::Quadrature { value: scale, estimate: err });
    }
    Ok((out, err))
}

fn reach_for(r: f64, beta: f64, tol: f64) -> f64 {
    let base = r.max(1.0 / beta.abs());
    let factor = (1.0 / tol.clamp(1e-14, 1e-1)).powf(0.2).max(10.0);
    factor * base
}

/// Gradient of the per-mode velocity kernel, indexed `[m][j][l]`.
pub fn grad_gamma_perp_mode(k: i64, x: &Vec3, params: &FlowParams, tol: f64) -> Result<(CTensor333, f64)> {
    check_point(x)?;
    if k == 0 {
        return Err(Error::ZeroFrequency);
    }
    let eta = params.mode_frequency(k);
    let lam = params.lambda;
    let gh = ExpKernel::helmholtz(eta, lam);
    let newton = ExpKernel::newton();
    let (side, beta, pref) = ray_setup(x, eta, lam);
    let r = norm(x);
    let at = |u: f64| [x[0] + side * u, x[1], x[2]];
    let dist = |u: f64| norm(&at(u));
    let g = |u: f64| {
        let y = at(u);
        let (a, b) = (newton.third(&y), gh.third(&y));
        let mut o = [CZERO; 27];
        for m in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    o[9 * m + 3 * j + l] = a[m][j][l] - b[m][j][l];
                }
            }
        }
        o
    };
    let reach = 3.0 * reach_for(r, beta, tol);
    let (v, err) = oscillatory_ray::<27>(beta, dist, g, None, reach);
    let dh = gh.gradient(x);
    let mut out = [[[CZERO; 3]; 3]; 3];
    for m in 0..3 {
        for j in 0..3 {
            for l in 0..3 {
                out[m][j][l] = pref * v[9 * m + 3 * j + l] + if j == l { dh[m] } else { CZERO };
            }
        }
    }
    Ok((out, err / lam))
}

/// Heat kernel with drift, `(4 pi tau)^{-3/2} exp(-|z + lambda tau e1|^2/(4 tau))`.
pub fn drift_heat_kernel(tau: f64, z: &Vec3, lambda: f64) -> f64 {
    let y0 = z[0] + lambda * tau;
    let q = y0 * y0 + z[1] * z[1] + z[2] * z[2];
    (4.0 * PI * tau).powf(-1.5) * (-q / (4.0 * tau)).exp()
}

fn heat_image_count(z: &Vec3, params: &FlowParams) -> usize {
    let lam = params.lambda;
    let horizon = 2.0 * norm(z) / lam + 200.0 / (lam * lam);
    (horizon / params.period).ceil() as usize + 1
}

/// `phi_perp(t, z)` from the time-domain identity
/// `phi_perp(t, z) = T sum_{n>=0} H(t + nT, z) - phi0(z)`, `t` reduced to `(0, T]`.
pub fn phi_perp_heat(t: f64, z: &Vec3, params: &FlowParams) -> Result<f64> {
    check_point(z)?;
    let tp = reduce_time(t, params.period);
    let n = heat_image_count(z, params);
    let mut sum = 0.0;
    for i in 0..=n {
        sum += drift_heat_kernel(tp + i as f64 * params.period, z, params.lambda);
    }
    let p0 = (-0.5 * params.lambda * crate::special::wake(z)).exp() / (4.0 * PI * norm(z));
    Ok(params.period * sum - p0)
}

fn reduce_time(t: f64, period: f64) -> f64 {
    let tp = t.rem_euclid(period);
    if tp == 0.0 {
        period
    } else {
        tp
    }
}

/// Gradient of `phi_perp` from the heat-image identity.
pub fn grad_phi_perp_heat(t: f64, z: &Vec3, params: &FlowParams) -> Result<Vec3> {
    check_point(z)?;
    Ok(grad_phi_perp_heat_unchecked(reduce_time(t, params.period), z, params, heat_image_count(z, params)))
}

fn grad_phi_perp_heat_unchecked(tp: f64, z: &Vec3, params: &FlowParams, n: usize) -> Vec3 {
    let lam = params.lambda;
    let mut g = [0.0; 3];
    for i in 0..=n {
        let tau = tp + i as f64 * params.period;
        let h = drift_heat_kernel(tau, z, lam);
        if h == 0.0 {
            continue;
        }
        let f = -h / (2.0 * tau);
        g[0] += f * (z[0] + lam * tau);
        g[1] += f * z[1];
        g[2] += f * z[2];
    }
    let g0 = grad_phi0_unchecked(z, lam);
    let t = params.period;
    [t * g[0] - g0[0], t * g[1] - g0[1], t * g[2] - g0[2]]
}

/// `||grad phi_perp(., z)||_{L1(T)}` with the normalized measure, by graded Gauss panels
/// in time over the heat-image representation.
pub fn grad_phi_perp_l1(z: &Vec3, params: &FlowParams) -> Result<f64> {
    check_point(z)?;
    let t = params.period;
    let r = norm(z);
    let n = heat_image_count(z, params);
    let t0 = (1e-3 * r * r).min(1e-3 * t);
    let mut edges = vec![0.0, t0];
    while *edges.last().unwrap() < t {
        let last = *edges.last().unwrap();
        edges.push((last * 1.25).min(last + 0.05 * t).min(t));
    }
    let mut acc = 0.0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for &(x, wt) in gl(8) {
            let g = grad_phi_perp_heat_unchecked(mid + half * x, z, params, n);
            acc += wt * half * norm(&g);
        }
    }
    Ok(acc / t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{cmat_norm, cnorm};

    fn unit() -> FlowParams {
        FlowParams::new(1.0, 2.0 * PI).unwrap()
    }

    #[test]
    fn gamma_h_examples() {
        let p = FlowParams::new(2.0, 2.0 * PI).unwrap();
        let g = gamma_h(&[0.0, 1.0, 0.0], 1.0, &p).unwrap();
        // oracle: |Gamma_H| = exp(-Im w |x| - lambda x1/2)/(4 pi |x|) with Im w = 1.098684
        assert!((g.norm() - (-1.098_684_f64).exp() / (4.0 * PI)).abs() < 1e-7);
        assert!((g.norm() - 0.02652).abs() < 5e-6);
        let x = [0.3, -1.2, 0.8];
        let a = gamma_h(&x, 2.5, &p).unwrap();
        let b = gamma_h(&x, -2.5, &p).unwrap();
        assert!((a - b.conj()).norm() < 1e-15);
        let w = sqrt_neg_mu(2.5, 2.0).unwrap();
        let modulus = (-w.im * norm(&x) - x[0]).exp() / (4.0 * PI * norm(&x));
        assert!((a.norm() - modulus).abs() < 1e-14 * modulus);
        assert!(matches!(gamma_h(&[0.0; 3], 1.0, &p), Err(Error::Singular)));
        assert!(matches!(gamma_h(&x, 0.0, &p), Err(Error::ZeroFrequency)));
    }

    #[test]
    fn grad_gamma_h_matches_differences() {
        let p = unit();
        let x = [1.0, 0.0, 1.0];
        let g = grad_gamma_h(&x, 2.0, &p).unwrap();
        let scale = cnorm(&g);
        for m in 0..3 {
            let d = |h: f64| {
                let mut xp = x;
                let mut xm = x;
                xp[m] += h;
                xm[m] -= h;
                (gamma_h(&xp, 2.0, &p).unwrap() - gamma_h(&xm, 2.0, &p).unwrap()) / (2.0 * h)
            };
            let rich = (4.0 * d(5e-4) - d(1e-3)) / 3.0;
            assert!((rich - g[m]).norm() < 1e-7 * scale);
        }
        let gm = grad_gamma_h(&x, -2.0, &p).unwrap();
        for m in 0..3 {
            assert!((gm[m] - g[m].conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn exp_kernel_hessian_and_third_match_differences() {
        let ker = ExpKernel::helmholtz(1.3, 0.8);
        let x = [0.4, -0.9, 0.7];
        let h = 1e-4;
        let hess = ker.hessian(&x);
        let third = ker.third(&x);
        for m in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[m] += h;
            xm[m] -= h;
            let (gp, gm) = (ker.gradient(&xp), ker.gradient(&xm));
            let (hp, hm) = (ker.hessian(&xp), ker.hessian(&xm));
            for j in 0..3 {
                let fd = (gp[j] - gm[j]) / (2.0 * h);
                assert!((fd - hess[m][j]).norm() < 1e-6, "hess {m}{j}");
                for l in 0..3 {
                    let fd3 = (hp[j][l] - hm[j][l]) / (2.0 * h);
                    assert!((fd3 - third[m][j][l]).norm() < 1e-6, "third {m}{j}{l}");
                }
            }
        }
    }

    #[test]
    fn bound_shape_ratio_for_grad_gamma_h() {
        let p = unit();
        let c4 = ConstantsRecord::new(&p).c4;
        let mut worst: f64 = 0.0;
        for i in 0..40 {
            let r = 0.5 * (40f64).powf(i as f64 / 39.0);
            for &eta in &[1.0, 10.0, 100.0] {
                for &c in &[-1.0, -0.5, 0.0, 0.7, 1.0] {
                    let s = (1.0f64 - c * c).sqrt();
                    let x = [r * c, r * s, 0.0];
                    let g = cnorm(&grad_gamma_h(&x, eta, &p).unwrap());
                    let shape = (r.powi(-2) + eta.sqrt() / r) * (-c4 * eta.sqrt() * r).exp();
                    worst = worst.max(g / shape);
                }
            }
        }
        assert!(worst.is_finite() && worst < 1.0, "{worst}");
    }

    #[test]
    fn constants_identities() {
        let p = unit();
        let c = ConstantsRecord::new(&p);
        assert_eq!(c.c5, (PI / p.period).sqrt() * c.c4 / 2.0);
        assert_eq!(c.k, p.lambda.min(c.c3) / 4.0);
        assert_eq!(c.c3, c.c5);
        assert!(c.c4 > 0.0 && c.c5 > 0.0 && c.k > 0.0);
    }

    #[test]
    fn phi_perp_is_real_and_certified() {
        let p = unit();
        let x = [2.0, 0.0, 0.0];
        let trunc = Truncation { tol: 1e-10, k_hard: 100_000 };
        let (v, cert) = phi_perp(0.0, &x, &p, &trunc).unwrap();
        assert!(cert.imag_residual.abs() <= 1e-12 * v.abs().max(1e-3));
        let refined = phi_perp_fixed(0.0, &x, &p, 2 * cert.k_used).re;
        assert!((refined - v).abs() <= cert.tail_bound);
        // time average over one period vanishes
        let n = 2 * cert.k_used + 1;
        let avg: f64 = (0..n)
            .map(|i| phi_perp(p.period * i as f64 / n as f64, &x, &p, &trunc).unwrap().0)
            .sum::<f64>()
            / n as f64;
        assert!(avg.abs() < 1e-10);
    }

    #[test]
    fn phi_perp_matches_heat_images() {
        let p = unit();
        for &x in &[[1.0, 0.5, 0.0], [-2.0, 0.3, 0.4], [0.0, 0.0, 3.0]] {
            for &t in &[0.4, 2.0, 5.5] {
                let trunc = Truncation { tol: 1e-11, k_hard: 1_000_000 };
                let (a, _) = phi_perp(t, &x, &p, &trunc).unwrap();
                let b = phi_perp_heat(t, &x, &p).unwrap();
                assert!((a - b).abs() < 1e-9, "{x:?} t={t}: {a} vs {b}");
                let (ga, _) = grad_phi_perp(t, &x, &p, &trunc).unwrap();
                let gb = grad_phi_perp_heat(t, &x, &p).unwrap();
                for c in 0..3 {
                    assert!((ga[c] - gb[c]).abs() < 1e-8, "{x:?} t={t}");
                }
            }
        }
    }

    #[test]
    fn truncation_failure_reported() {
        let p = unit();
        let trunc = Truncation { tol: 1e-12, k_hard: 10 };
        assert!(matches!(phi_perp(0.0, &[0.5, 0.0, 0.0], &p, &trunc), Err(Error::Truncation { .. })));
    }

    #[test]
    fn lq_norms() {
        let p = unit();
        let trunc = Truncation { tol: 1e-9, k_hard: 1_000_000 };
        let n1 = lq_time_norm(TimeKernel::PhiPerp, &[1.0, 0.0, 0.0], 1.0, &p, &trunc).unwrap();
        let n2 = lq_time_norm(TimeKernel::PhiPerp, &[2.0, 0.0, 0.0], 1.0, &p, &trunc).unwrap();
        let n4 = lq_time_norm(TimeKernel::PhiPerp, &[4.0, 0.0, 0.0], 1.0, &p, &trunc).unwrap();
        assert!(n1 > n2 && n2 > n4);
        let l2 = lq_time_norm(TimeKernel::PhiPerp, &[2.0, 0.0, 0.0], 2.0, &p, &trunc).unwrap();
        assert!(l2 >= n2);
    }

    #[test]
    fn multiplier_vanishes_below_cutoff() {
        let p = unit();
        let (m, em) = multiplier_value(MultiplierOrder::Zero, &[1.0, 0.0, 0.0], 0.25, &p, 0.4);
        assert_eq!(m, CZERO);
        assert_eq!(em, CZERO);
        let rep = multiplier_diag(MultiplierOrder::Derivative(0), &[1.0, 1.0, 0.0], 0.25, &p).unwrap();
        assert!(rep.sup.is_finite() && rep.sup > 0.0);
    }

    #[test]
    fn multiplier_eta_derivative_matches_differences() {
        let p = unit();
        let x = [0.7, -0.4, 0.9];
        for order in [MultiplierOrder::Zero, MultiplierOrder::Derivative(0), MultiplierOrder::Derivative(2)] {
            for &eta in &[0.8, 1.7, -3.0] {
                let (_, em) = multiplier_value(order, &x, 0.25, &p, eta);
                let h = 1e-5;
                let fd = (multiplier_value(order, &x, 0.25, &p, eta + h).0 - multiplier_value(order, &x, 0.25, &p, eta - h).0)
                    / (2.0 * h);
                assert!((em - eta * fd).norm() < 1e-7 * em.norm().max(1e-8), "{order:?} {eta}");
            }
        }
    }

    #[test]
    fn gamma_perp_trace_identity_and_symmetry() {
        let p = unit();
        for &x in &[[1.5, 0.5, 0.0], [-2.0, 1.0, 0.5], [0.0, 3.0, 0.0]] {
            let (g, err) = gamma_perp_mode(1, &x, &p, 1e-8).unwrap();
            let gh = gamma_h(&x, 1.0, &p).unwrap();
            let tr = g[0][0] + g[1][1] + g[2][2];
            assert!((tr - 2.0 * gh).norm() < 1e-6 * gh.norm().max(cmat_norm(&g)), "{x:?} {err}");
            for j in 0..3 {
                for l in 0..3 {
                    assert!((g[j][l] - g[l][j]).norm() < 1e-8 * cmat_norm(&g));
                }
            }
        }
    }

    #[test]
    fn gamma_perp_mode_is_divergence_free() {
        let p = unit();
        let x = [0.8, 1.1, -0.6];
        let (gg, _) = grad_gamma_perp_mode(1, &x, &p, 1e-8).unwrap();
        let scale = crate::geom::ctensor_norm(&gg);
        for j in 0..3 {
            let div = gg[0][j][0] + gg[1][j][1] + gg[2][j][2];
            assert!(div.norm() < 1e-6 * scale, "{}", div.norm() / scale);
        }
        let h = 1e-3;
        for m in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[m] += h;
            xm[m] -= h;
            let (a, _) = gamma_perp_mode(1, &xp, &p, 1e-9).unwrap();
            let (b, _) = gamma_perp_mode(1, &xm, &p, 1e-9).unwrap();
            for j in 0..3 {
                for l in 0..3 {
                    let fd = (a[j][l] - b[j][l]) / (2.0 * h);
                    assert!((fd - gg[m][j][l]).norm() < 1e-5 * scale);
                }
            }
        }
    }

    #[test]
    fn grad_phi_perp_l1_is_positive_and_decreasing_upstream() {
        let p = unit();
        let a = grad_phi_perp_l1(&[1.0, 0.0, 0.0], &p).unwrap();
        let b = grad_phi_perp_l1(&[2.0, 0.0, 0.0], &p).unwrap();
        assert!(a > b && b > 0.0);
    }
}
