//! Convolution of `||grad phi_perp(., z)||_{L1(T)}` against synthetic sources decaying
//! like `(1+|y|)^{-a} e^{-alpha s(lambda y)}`, sampled on a wake sheet and fitted.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_decay, DecayFitReport, DecaySample, FitWindow};
use super::RaySpec;
use crate::error::{invalid, Result};
use crate::geom::{norm, Vec3};
use crate::periodic::grad_phi_perp_l1;
use crate::quadrature::gauss_legendre;
use crate::special::{wake, FlowParams};

/// `g(y) = amplitude (1+|y|)^{-exponent} e^{-alpha s(lambda y)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSource {
    pub amplitude: f64,
    pub exponent: f64,
    pub alpha: f64,
}

impl SurrogateSource {
    fn at(&self, y: &Vec3, lambda: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        self.amplitude * (1.0 + norm(y)).powf(-self.exponent) * (-self.alpha * lambda * wake(y)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    /// Wake sheet `s(x) = sigma` carrying the samples.
    pub sigma: f64,
    /// Kernel cut-off radius (also the table extent).
    pub kernel_radius: f64,
    /// Angular table nodes on `[0, pi]`.
    pub table_angles: usize,
    /// Gauss-Legendre nodes per radial and polar panel.
    pub order: usize,
    pub azimuth_count: usize,
    pub window: FitWindow,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            kernel_radius: 125.0,
            table_angles: 65,
            order: 8,
            azimuth_count: 32,
            window: FitWindow { r_min: 10.0, r_max: 40.0 },
        }
    }
}

/// `q(r, theta) = 4 pi r^2 ||grad phi_perp||_{L1(T)}` tabulated against `r` and the
/// angle `theta` from `e1`; `log q` is interpolated by 4-point Lagrange stencils.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub params: FlowParams,
    radii: Vec<f64>,
    angles: Vec<f64>,
    /// `log q`, radius-major.
    log_q: Vec<f64>,
    /// `max_theta q(r_max, theta)`.
    pub edge: f64,
}

fn lagrange4(xs: [f64; 4], ys: [f64; 4], x: f64) -> f64 {
    let mut out = 0.0;
    for i in 0..4 {
        let mut w = 1.0;
        for j in 0..4 {
            if i != j {
                w *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        out += w * ys[i];
    }
    out
}

impl KernelTable {
    pub fn build(params: &FlowParams, r_max: f64, angles: usize) -> Result<Self> {
        if !(r_max > 10.0) || angles < 8 {
            return Err(invalid("table", "need r_max > 10 and at least 8 angles"));
        }
        let mut radii = vec![];
        let mut r = 1e-3;
        while r < 1.0 {
            radii.push(r);
            r *= 1.25;
        }
        let mut r = 1.0;
        while r < 10.0 {
            radii.push(r);
            r += 0.25;
        }
        let mut r = 10.0;
        while r < r_max {
            radii.push(r);
            r += 1.0;
        }
        radii.push(r_max);
        let angles: Vec<f64> = (0..angles).map(|j| PI * j as f64 / (angles - 1) as f64).collect();
        let nodes: Vec<(f64, f64)> = radii.iter().flat_map(|&r| angles.iter().map(move |&a| (r, a))).collect();
        let log_q = nodes
            .par_iter()
            .map(|&(r, a)| {
                let z = [r * a.cos(), r * a.sin(), 0.0];
                grad_phi_perp_l1(&z, params).map(|g| (4.0 * PI * r * r * g).max(1e-300).ln())
            })
            .collect::<Result<Vec<f64>>>()?;
        let na = angles.len();
        let last = &log_q[(radii.len() - 1) * na..];
        let edge = last.iter().map(|v| v.exp()).fold(0.0, f64::max);
        Ok(Self { params: *params, radii, angles, log_q, edge })
    }

    pub fn r_max(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    fn angle_value(&self, ir: usize, theta: f64) -> f64 {
        let na = self.angles.len();
        let h = self.angles[1];
        let j = ((theta / h).floor() as isize).clamp(0, na as isize - 2);
        let mut xs = [0.0; 4];
        let mut ys = [0.0; 4];
        for (m, off) in (-1..=2).enumerate() {
            // q is even about theta = 0 and theta = pi
            let jj = j + off;
            let (idx, x) = if jj < 0 {
                ((-jj) as usize, jj as f64 * h)
            } else if jj >= na as isize {
                ((2 * (na as isize - 1) - jj) as usize, jj as f64 * h)
            } else {
                (jj as usize, self.angles[jj as usize])
            };
            xs[m] = x;
            ys[m] = self.log_q[ir * na + idx];
        }
        lagrange4(xs, ys, theta)
    }

    /// `q(r, theta)`; constant below the first node, zero beyond `r_max`.
    pub fn q(&self, r: f64, theta: f64) -> f64 {
        let n = self.radii.len();
        if r > self.r_max() {
            return 0.0;
        }
        let r = r.max(self.radii[0]);
        let i = self.radii.partition_point(|&v| v <= r).clamp(2, n - 2) - 2;
        let i = i.min(n - 4);
        let xs = [self.radii[i], self.radii[i + 1], self.radii[i + 2], self.radii[i + 3]];
        let ys = [self.angle_value(i, theta), self.angle_value(i + 1, theta), self.angle_value(i + 2, theta), self.angle_value(i + 3, theta)];
        lagrange4(xs, ys, r).exp()
    }
}

fn panels(edges: &[f64], order: usize) -> Vec<(f64, f64)> {
    let rule = gauss_legendre(order);
    let mut out = Vec::with_capacity(edges.len() * order);
    for w in edges.windows(2) {
        let (mid, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        out.extend(rule.iter().map(|&(t, wt)| (mid + half * t, half * wt)));
    }
    out
}

/// `int_{|z| < R} G(z) g(x - z) dz` in spherical coordinates about `x` (polar axis `e1`,
/// panels refined toward the wake direction `theta = pi`).
fn convolve(table: &KernelTable, source: &SurrogateSource, x: &Vec3, r_cut: f64, order: usize, azimuth: usize) -> f64 {
    let lam = table.params.lambda;
    let mut re = vec![0.0, 0.5, 1.0];
    let mut r = 1.0;
    while r < r_cut {
        r += if r < 10.0 { 1.0 } else if r < 40.0 { 2.0 } else { 5.0 };
        re.push(r.min(r_cut));
    }
    let mut te = vec![0.0, 0.5 * PI];
    let mut gap = 0.5 * PI;
    while gap > PI / 256.0 {
        gap *= 0.5;
        te.push(PI - gap);
    }
    te.push(PI);
    let rn = panels(&re, order);
    let tn = panels(&te, order);
    let parts: Vec<f64> = tn
        .par_iter()
        .map(|&(th, wt)| {
            let (ct, st) = (th.cos(), th.sin());
            let mut acc = 0.0;
            for &(r, wr) in &rn {
                let q = table.q(r, th);
                if q == 0.0 {
                    continue;
                }
                let mut s = 0.0;
                for a in 0..azimuth {
                    let ph = 2.0 * PI * (a as f64 + 0.5) / azimuth as f64;
                    let z = [r * ct, r * st * ph.cos(), r * st * ph.sin()];
                    s += source.at(&[x[0] - z[0], x[1] - z[1], x[2] - z[2]], lam);
                }
                acc += wr * q * s;
            }
            acc * wt * st
        })
        .collect();
    // dz = r^2 sin(theta) dr dtheta dphi and G = q/(4 pi r^2)
    crate::geom::pairwise_sum(&parts, 0.0, &|a, b| a + b) * 2.0 * PI / azimuth as f64 / (4.0 * PI)
}

/// Samples of the surrogate convolution on the wake sheet, with error budgets from a
/// coarser rule plus the kernel cut-off.
pub fn surrogate_samples(table: &KernelTable, source: &SurrogateSource, radii: &[f64], spec: &SurrogateSpec) -> Result<Vec<DecaySample>> {
    let rays = RaySpec::wake_sheet(spec.sigma, radii.to_vec())?;
    let r_cut = spec.kernel_radius.min(table.r_max());
    let cut = table.edge / (4.0 * PI * r_cut * r_cut) * source.amplitude.abs() * 4.0 * PI * r_cut.powi(3);
    Ok(rays
        .points()
        .iter()
        .map(|x| {
            let fine = convolve(table, source, x, r_cut, spec.order, spec.azimuth_count);
            let coarse = convolve(table, source, x, r_cut, (spec.order * 3 / 4).max(2), spec.azimuth_count * 3 / 4);
            DecaySample { r: norm(x), s: wake(x), value: fine, budget: (fine - coarse).abs() + cut }
        })
        .collect())
}

/// Fit of the algebraic exponent of the surrogate convolution on the wake sheet.
pub fn kernel_surrogate_decay(table: &KernelTable, source: &SurrogateSource, radii: &[f64], spec: &SurrogateSpec) -> Result<DecayFitReport> {
    let samples = surrogate_samples(table, source, radii, spec)?;
    fit_decay(&format!("surrogate_a{}", source.exponent), &samples, spec.window)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> FlowParams {
        FlowParams::new(1.0, 2.0 * PI).unwrap()
    }

    #[test]
    fn table_reproduces_direct_values() {
        let p = params();
        let t = KernelTable::build(&p, 30.0, 33).unwrap();
        for (r, th) in [(0.37, 0.4), (2.2, 2.9), (7.3, 3.1), (15.5, 1.0), (22.0, 3.0)] {
            let z = [r * f64::cos(th), r * f64::sin(th), 0.0];
            let want = 4.0 * PI * r * r * grad_phi_perp_l1(&z, &p).unwrap();
            let got = t.q(r, th);
            assert!((got - want).abs() < 2e-3 * want, "r={r} th={th}: {got} vs {want}");
        }
        assert_eq!(t.q(31.0, 1.0), 0.0);
    }

    #[test]
    fn zero_source_is_rejected() {
        let p = params();
        let t = KernelTable::build(&p, 12.0, 9).unwrap();
        let src = SurrogateSource { amplitude: 0.0, exponent: 4.5, alpha: 0.1 };
        let spec = SurrogateSpec { kernel_radius: 12.0, order: 3, azimuth_count: 8, ..SurrogateSpec::default() };
        let radii: Vec<f64> = (0..6).map(|i| 10.0 + 5.0 * i as f64).collect();
        assert!(kernel_surrogate_decay(&t, &src, &radii, &spec).is_err());
    }
}
