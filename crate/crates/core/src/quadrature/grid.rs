//! Convolutions with sources sampled on a uniform periodic grid.

use rayon::prelude::*;

use super::{gauss_legendre, partition, ConvolutionResult, QuadratureSpec};
use crate::error::{invalid, Result};
use crate::geom::{pairwise_sum, Vec3};
use std::f64::consts::PI;

const STENCIL: usize = 6;

/// Source values at nodes `-L + i h`, `h = 2L/n`, stored node-major with `channels`
/// values per node; index `((i n + j) n + k) channels + c`.
#[derive(Debug, Clone)]
pub struct GridSource {
    pub n: usize,
    pub half_length: f64,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl GridSource {
    pub fn new(n: usize, half_length: f64, channels: usize, values: Vec<f64>) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(invalid("n", "grid size must be even and at least 4"));
        }
        if !(half_length > 0.0) {
            return Err(invalid("half_length", "must be positive"));
        }
        if values.len() != n * n * n * channels {
            return Err(invalid("values", "length must be n^3 * channels"));
        }
        Ok(Self { n, half_length, channels, values })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.n as f64
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let h = self.spacing();
        let l = self.half_length;
        [-l + i as f64 * h, -l + j as f64 * h, -l + k as f64 * h]
    }

    fn at(&self, i: usize, j: usize, k: usize) -> &[f64] {
        let o = ((i * self.n + j) * self.n + k) * self.channels;
        &self.values[o..o + self.channels]
    }

    /// Six-point Lagrange interpolation per axis with periodic wrap; zero outside the box.
    pub fn interpolate(&self, y: &Vec3, out: &mut [f64]) {
        self.interpolate_with(y, out, STENCIL)
    }

    /// Lagrange interpolation on `stencil` (even, at most 6) nodes per axis.
    pub fn interpolate_with(&self, y: &Vec3, out: &mut [f64], stencil: usize) {
        let stencil = stencil.clamp(2, STENCIL) & !1;
        let back = (stencil / 2 - 1) as isize;
        out.iter_mut().for_each(|v| *v = 0.0);
        let l = self.half_length;
        if y.iter().any(|c| *c < -l || *c >= l) {
            return;
        }
        let h = self.spacing();
        let n = self.n as isize;
        let mut idx = [[0usize; STENCIL]; 3];
        let mut w = [[0.0f64; STENCIL]; 3];
        for a in 0..3 {
            let s = (y[a] + l) / h;
            let i0 = s.floor();
            let t = s - i0;
            for m in 0..stencil {
                let om = m as f64 - back as f64;
                let mut v = 1.0;
                for q in 0..stencil {
                    if q != m {
                        let oq = q as f64 - back as f64;
                        v *= (t - oq) / (om - oq);
                    }
                }
                w[a][m] = v;
                idx[a][m] = (i0 as isize - back + m as isize).rem_euclid(n) as usize;
            }
        }
        for (a, wa) in w[0][..stencil].iter().enumerate() {
            for (b, wb) in w[1][..stencil].iter().enumerate() {
                let fab = wa * wb;
                for (c, wc) in w[2][..stencil].iter().enumerate() {
                    let f = fab * wc;
                    let v = self.at(idx[0][a], idx[1][b], idx[2][c]);
                    for (o, vv) in out.iter_mut().zip(v) {
                        *o += f * vv;
                    }
                }
            }
        }
    }
}

fn grid_sum<const N: usize>(
    product: &(dyn Fn(&Vec3, &[f64]) -> [f64; N] + Sync),
    grid: &GridSource,
    x: &Vec3,
    rho: f64,
    stride: usize,
) -> [f64; N] {
    let n = grid.n;
    let h = grid.spacing() * stride as f64;
    let vol = h * h * h;
    let planes: Vec<[f64; N]> = (0..n)
        .step_by(stride)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&i| {
            let mut acc = [0.0; N];
            for j in (0..n).step_by(stride) {
                for k in (0..n).step_by(stride) {
                    let y = grid.node(i, j, k);
                    let z = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
                    let r = (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt();
                    let w = 1.0 - partition(r / rho);
                    if w == 0.0 {
                        continue;
                    }
                    let v = product(&z, grid.at(i, j, k));
                    for c in 0..N {
                        acc[c] += w * vol * v[c];
                    }
                }
            }
            acc
        })
        .collect();
    pairwise_sum(&planes, [0.0; N], &|a, b| {
        let mut o = a;
        for c in 0..N {
            o[c] += b[c];
        }
        o
    })
}

fn near_sum<const N: usize>(
    product: &(dyn Fn(&Vec3, &[f64]) -> [f64; N] + Sync),
    grid: &GridSource,
    x: &Vec3,
    rho: f64,
    order: usize,
    stencil: usize,
) -> [f64; N] {
    let rule = gauss_legendre(order);
    let naz = 2 * order;
    let mut buf = vec![0.0; grid.channels];
    let mut acc = [0.0; N];
    for &(tc, wc) in rule {
        let ct = tc;
        let st = (1.0 - ct * ct).sqrt();
        for a in 0..naz {
            let ph = 2.0 * PI * (a as f64 + 0.5) / naz as f64;
            let dir = [ct, st * ph.cos(), st * ph.sin()];
            let dw = wc * 2.0 * PI / naz as f64;
            for (p0, p1) in [(0.0, rho), (rho, 2.0 * rho)] {
                for &(tr, wr) in rule {
                    let r = 0.5 * (p0 + p1) + 0.5 * (p1 - p0) * tr;
                    let jac = 0.5 * (p1 - p0) * wr * r * r;
                    let w = partition(r / rho);
                    if w == 0.0 {
                        continue;
                    }
                    let y = [x[0] + r * dir[0], x[1] + r * dir[1], x[2] + r * dir[2]];
                    grid.interpolate_with(&y, &mut buf, stencil);
                    let z = [-r * dir[0], -r * dir[1], -r * dir[2]];
                    let v = product(&z, &buf);
                    for c in 0..N {
                        acc[c] += dw * jac * w * v[c];
                    }
                }
            }
        }
    }
    acc
}

/// `int_box product(x - y, f(y)) dy` for a grid source `f`: trapezoidal sum over nodes
/// away from `x`, spherical Gauss rule on the interpolated source near `x`. The error
/// estimate compares against the sum on every second node and a near field of lower
/// quadrature and interpolation order;
/// the tail is the declared decay model outside the inscribed ball `|y| <= L`.
pub fn convolve_grid<const N: usize>(
    product: &(dyn Fn(&Vec3, &[f64]) -> [f64; N] + Sync),
    grid: &GridSource,
    x: &Vec3,
    spec: &QuadratureSpec,
) -> Result<ConvolutionResult> {
    let (value, est) = grid_core(product, grid, x, spec, N)?;
    Ok(ConvolutionResult { value: value.to_vec(), error_estimate: est, tail_estimate: spec.tail_model.bound(x, grid.half_length) })
}

/// As [`convolve_grid`], but the last channel is an auxiliary sum excluded from the
/// error estimate and returned as the tail estimate (scaled by the caller's model).
pub(crate) fn convolve_grid_aux<const N: usize>(
    product: &(dyn Fn(&Vec3, &[f64]) -> [f64; N] + Sync),
    grid: &GridSource,
    x: &Vec3,
    spec: &QuadratureSpec,
) -> Result<ConvolutionResult> {
    let (value, est) = grid_core(product, grid, x, spec, N - 1)?;
    Ok(ConvolutionResult { value: value[..N - 1].to_vec(), error_estimate: est, tail_estimate: value[N - 1].abs() })
}

fn grid_core<const N: usize>(
    product: &(dyn Fn(&Vec3, &[f64]) -> [f64; N] + Sync),
    grid: &GridSource,
    x: &Vec3,
    spec: &QuadratureSpec,
    checked: usize,
) -> Result<([f64; N], f64)> {
    spec.validate()?;
    let h = grid.spacing();
    let rho = spec.split_radius.unwrap_or(6.0 * h).max(2.0 * h);
    let l = grid.half_length;
    let inside_reach = x.iter().all(|c| c.abs() < l + 2.0 * rho);
    let stride = spec.grid_stride;
    let fine = grid_sum(product, grid, x, rho, stride);
    let coarse = grid_sum(product, grid, x, rho, 2 * stride);
    let (near, near_lo) = if inside_reach {
        (
            near_sum(product, grid, x, rho, spec.radial_order.max(4) * 2, STENCIL),
            near_sum(product, grid, x, rho, spec.radial_order.max(4), STENCIL - 2),
        )
    } else {
        ([0.0; N], [0.0; N])
    };
    let mut value = [0.0; N];
    let mut est = 0.0f64;
    for c in 0..N {
        value[c] = fine[c] + near[c];
        if c < checked {
            est = est.max((fine[c] - coarse[c]).abs() + (near[c] - near_lo[c]).abs());
        }
    }
    // summation round-off over n^3 nodes
    let round = (grid.n as f64).powi(3) * f64::EPSILON * value[..checked].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((value, est.max(round)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::norm;

    fn gaussian_grid(n: usize, l: f64) -> GridSource {
        let mut v = Vec::with_capacity(n * n * n);
        let h = 2.0 * l / n as f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let y = [-l + i as f64 * h, -l + j as f64 * h, -l + k as f64 * h];
                    v.push((-(y[0] * y[0] + y[1] * y[1] + y[2] * y[2])).exp());
                }
            }
        }
        GridSource::new(n, l, 1, v).unwrap()
    }

    #[test]
    fn newton_potential_of_gaussian() {
        let g = gaussian_grid(48, 6.0);
        let spec = QuadratureSpec::default();
        let newton = |z: &Vec3, f: &[f64]| [f[0] / (4.0 * PI * norm(z))];
        for x in [[0.3, 0.1, -0.2], [2.0, 1.0, 0.0], [9.0, 0.0, 0.0]] {
            let r = convolve_grid::<1>(&newton, &g, &x, &spec).unwrap();
            // u(r) = pi^{3/2} erf(r) / (4 pi r)
            let rr = norm(&x);
            let exact = PI.powf(1.5) * libm::erf(rr) / (4.0 * PI * rr);
            let err = (r.value[0] - exact).abs();
            assert!(err < 5e-5 * exact && err <= r.error_estimate, "{x:?}: {} vs {exact}", r.value[0]);
        }
    }

    #[test]
    fn interpolation_is_exact_for_quintics_inside() {
        let n = 16;
        let l = 2.0;
        let h = 2.0 * l / n as f64;
        let f = |y: &Vec3| 1.0 + y[0] - 0.5 * y[1].powi(5) + 0.1 * y[2].powi(3) + y[0] * y[1] * y[2].powi(4);
        let mut v = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    v.push(f(&[-l + i as f64 * h, -l + j as f64 * h, -l + k as f64 * h]));
                }
            }
        }
        let g = GridSource::new(n, l, 1, v).unwrap();
        let mut out = [0.0];
        let y = [0.13, -0.4, 0.77];
        g.interpolate(&y, &mut out);
        assert!((out[0] - f(&y)).abs() < 1e-12);
    }
}
