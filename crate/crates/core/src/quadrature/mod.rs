//! Quadrature for convolutions `int K(x - y) f(y) dy` over R^3 and over T x R^3.
//!
//! The integration domain `|y| <= L` is split with a smooth partition of unity into an
//! origin-centred spherical piece (where the source may be non-smooth) and an
//! x-centred spherical piece (where the kernel is singular). Polar panels are graded
//! toward both poles of the `e1` axis, where wake-type kernels and sources concentrate;
//! radial panels are graded geometrically toward the centre of each piece. Errors are
//! estimated by raising all quadrature orders by a factor 1.5.

mod grid;
mod verify;

pub use grid::{convolve_grid, GridSource};
pub(crate) use grid::convolve_grid_aux;
pub use verify::{
    verify_conv_exp, verify_exp_shift, verify_farwig, verify_wake_conv, window_change, window_radii, ExpShiftReport,
    VerifierReport, VerifierRow,
};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{invalid, Error, Result};
use crate::geom::{norm, pairwise_sum, Vec3};
use crate::special::FlowParams;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, cached for orders up to 96.
pub(crate) fn gauss_legendre(n: usize) -> &'static [(f64, f64)] {
    static RULES: OnceLock<Vec<Vec<(f64, f64)>>> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        (0..=96)
            .map(|k: usize| match std::num::NonZeroUsize::new(k) {
                Some(nz) => GaussLegendre::new(nz).as_node_weight_pairs().to_vec(),
                None => Vec::new(),
            })
            .collect()
    });
    &rules[n.min(96)]
}

/// Smooth partition function: 1 on `t <= 1`, 0 on `t >= 2`, `C^infinity` in between.
pub fn partition(t: f64) -> f64 {
    if t <= 1.0 {
        return 1.0;
    }
    if t >= 2.0 {
        return 0.0;
    }
    let f = |u: f64| if u <= 0.0 { 0.0 } else { (-1.0 / u).exp() };
    let a = f(2.0 - t);
    a / (a + f(t - 1.0))
}

/// Declared bound on the integration remainder `int_{|y| > L}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TailModel {
    /// Source vanishes outside `|y| <= L`.
    None,
    /// `|K(z)| <= kernel_coef |z|^{-kernel_power}`, `|f(y)| <= source_coef |y|^{-source_power}`.
    Algebraic { kernel_coef: f64, kernel_power: f64, source_coef: f64, source_power: f64 },
}

impl TailModel {
    /// Bound on `int_{|y| > l} |K(x - y)| |f(y)| dy`.
    pub fn bound(&self, x: &Vec3, l: f64) -> f64 {
        match *self {
            TailModel::None => 0.0,
            TailModel::Algebraic { kernel_coef, kernel_power: p, source_coef, source_power: a } => {
                let r = norm(x);
                if !(l > r) || !(a + p > 3.0) {
                    return f64::INFINITY;
                }
                // |x - y| >= |y| (l - r)/l on |y| >= l
                4.0 * PI * kernel_coef * source_coef * (l / (l - r)).powf(p) * l.powf(3.0 - a - p) / (a + p - 3.0)
            }
        }
    }
}

/// Quadrature controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Radius of the spherical ball about the singular point; default `min(1, |x|/4)`.
    pub split_radius: Option<f64>,
    /// Gauss-Legendre nodes per radial panel.
    pub radial_order: usize,
    /// Gauss-Legendre nodes per polar panel.
    pub polar_order: usize,
    /// Trapezoid nodes in azimuth.
    pub azimuth_count: usize,
    /// Truncation radius `L` of the source domain.
    pub box_half_length: f64,
    /// Node spacing used for the far field of grid sources (multiple of the grid spacing).
    pub grid_stride: usize,
    pub tail_model: TailModel,
    /// Relative tolerance for the refinement loop.
    pub rel_tol: f64,
    /// Absolute floor for the refinement loop.
    pub abs_tol: f64,
    /// Maximal number of refinements beyond the first comparison.
    pub max_refinements: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            split_radius: None,
            radial_order: 8,
            polar_order: 8,
            azimuth_count: 24,
            box_half_length: 1e6,
            grid_stride: 1,
            tail_model: TailModel::None,
            rel_tol: 1e-6,
            abs_tol: 1e-300,
            max_refinements: 2,
        }
    }
}

impl QuadratureSpec {
    fn validate(&self) -> Result<()> {
        if let Some(r) = self.split_radius {
            if !(r > 0.0) {
                return Err(invalid("split_radius", "must be positive"));
            }
        }
        if self.radial_order == 0 || self.polar_order == 0 || self.azimuth_count == 0 {
            return Err(invalid("order", "quadrature orders must be positive"));
        }
        if !(self.box_half_length > 0.0) {
            return Err(invalid("box_half_length", "must be positive"));
        }
        if self.grid_stride == 0 {
            return Err(invalid("grid_stride", "must be positive"));
        }
        Ok(())
    }

    pub(crate) fn level(&self, l: usize) -> Orders {
        let f = 1.5f64.powi(l as i32);
        Orders {
            radial: ((self.radial_order as f64 * f).round() as usize).min(96),
            polar: ((self.polar_order as f64 * f).round() as usize).min(96),
            azimuth: (self.azimuth_count as f64 * f).round() as usize,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Orders {
    pub(crate) radial: usize,
    pub(crate) polar: usize,
    pub(crate) azimuth: usize,
}

/// Value of a convolution with its quadrature and truncation error estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionResult {
    pub value: Vec<f64>,
    pub error_estimate: f64,
    pub tail_estimate: f64,
}

/// Support of a function-handle source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Support {
    /// `f = 0` outside the ball `|y| <= radius`.
    Ball { radius: f64 },
    Whole,
}

pub(crate) struct Piece<'a> {
    pub(crate) centre: Vec3,
    /// Outer radius of the source domain, centred at the origin.
    pub(crate) outer: f64,
    /// Radius of the inner graded panel.
    pub(crate) eps: f64,
    /// Extra radial breakpoints given as spheres about the origin.
    pub(crate) spheres: &'a [f64],
    pub(crate) weight: &'a (dyn Fn(&Vec3) -> f64 + Sync),
}

fn ray_sphere(c: &Vec3, w: &Vec3, rad: f64) -> Option<(f64, f64)> {
    let b = c[0] * w[0] + c[1] * w[1] + c[2] * w[2];
    let q = c[0] * c[0] + c[1] * c[1] + c[2] * c[2] - rad * rad;
    let disc = b * b - q;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    Some((-b - s, -b + s))
}

fn polar_edges() -> Vec<f64> {
    let mut half = vec![0.0];
    let mut th = 4e-3;
    while th < 0.5 * PI {
        half.push(th);
        th *= 2.0;
    }
    half.push(0.5 * PI);
    let mut edges = half.clone();
    for &t in half.iter().rev().skip(1) {
        edges.push(PI - t);
    }
    edges
}

fn radial_edges(lo: f64, hi: f64, eps: f64, breaks: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0];
    let mut a = eps * 4f64.powi(-6);
    while a < eps * 0.99 {
        e.push(a);
        a *= 4.0;
    }
    let mut a = eps;
    while a < hi {
        e.push(a);
        a *= if a < 64.0 * eps { 2.0 } else { 4.0 };
    }
    e.extend_from_slice(breaks);
    e.push(lo);
    e.push(hi);
    e.retain(|&v| v >= lo && v <= hi);
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-300));
    e
}

pub(crate) fn integrate_piece<const N: usize>(
    piece: &Piece,
    integrand: &(dyn Fn(&Vec3) -> [f64; N] + Sync),
    ord: Orders,
) -> [f64; N] {
    let pe = polar_edges();
    let mut dirs = Vec::new();
    for w in pe.windows(2) {
        let (mid, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        for &(t, wt) in gauss_legendre(ord.polar) {
            let th = mid + half * t;
            for j in 0..ord.azimuth {
                let ph = 2.0 * PI * (j as f64 + 0.5) / ord.azimuth as f64;
                let (st, ct) = th.sin_cos();
                let dir = [ct, st * ph.cos(), st * ph.sin()];
                dirs.push((dir, wt * half * st * 2.0 * PI / ord.azimuth as f64));
            }
        }
    }
    let rule = gauss_legendre(ord.radial);
    let parts: Vec<[f64; N]> = dirs
        .par_iter()
        .map(|(dir, dw)| {
            let mut acc = [0.0; N];
            let (lo, hi) = match ray_sphere(&piece.centre, dir, piece.outer) {
                Some((a, b)) if b > 0.0 => (a.max(0.0), b),
                _ => return acc,
            };
            let mut breaks = Vec::new();
            for &s in piece.spheres {
                if let Some((a, b)) = ray_sphere(&piece.centre, dir, s) {
                    breaks.push(a);
                    breaks.push(b);
                }
            }
            let edges = radial_edges(lo, hi, piece.eps, &breaks);
            for (i, w) in edges.windows(2).enumerate() {
                let (a, b) = (w[0], w[1]);
                for &(t, wt) in rule {
                    // innermost panel at the centre: r = b u^2 removes r^{-1/2}-type behaviour
                    let (r, jac) = if i == 0 && a == 0.0 {
                        let u = 0.5 * (t + 1.0);
                        (b * u * u, 0.5 * wt * 2.0 * b * u)
                    } else {
                        (0.5 * (a + b) + 0.5 * (b - a) * t, 0.5 * (b - a) * wt)
                    };
                    let y = [piece.centre[0] + r * dir[0], piece.centre[1] + r * dir[1], piece.centre[2] + r * dir[2]];
                    let pw = (piece.weight)(&y);
                    if pw == 0.0 {
                        continue;
                    }
                    let v = integrand(&y);
                    let f = jac * r * r * pw;
                    for c in 0..N {
                        acc[c] += f * v[c];
                    }
                }
            }
            for c in 0..N {
                acc[c] *= dw;
            }
            acc
        })
        .collect();
    pairwise_sum(&parts, [0.0; N], &|a, b| {
        let mut o = a;
        for c in 0..N {
            o[c] += b[c];
        }
        o
    })
}

pub(crate) fn integrate_once<const N: usize>(
    integrand: &(dyn Fn(&Vec3) -> [f64; N] + Sync),
    x: &Vec3,
    outer: f64,
    spec: &QuadratureSpec,
    ord: Orders,
) -> [f64; N] {
    let rx = norm(x);
    let eps = spec.split_radius.unwrap_or_else(|| (rx / 4.0).min(1.0));
    let one = |_: &Vec3| 1.0;
    if rx <= 1e-12 * outer.max(1.0) {
        let p = Piece { centre: [0.0; 3], outer, eps: eps.max(1e-3).min(1.0), spheres: &[], weight: &one };
        return integrate_piece(&p, integrand, ord);
    }
    if rx - outer >= eps {
        // x outside the support: the kernel is smooth on the source domain
        let spheres = [0.5 * outer, 0.75 * outer];
        let p = Piece { centre: [0.0; 3], outer, eps: (0.25 * outer).min(1.0), spheres: &spheres, weight: &one };
        return integrate_piece(&p, integrand, ord);
    }
    let rho = rx / 4.0;
    let inner = |y: &Vec3| partition(norm(y) / rho);
    let outer_w = |y: &Vec3| 1.0 - partition(norm(y) / rho);
    let spheres = [rho, 2.0 * rho];
    let a = Piece { centre: [0.0; 3], outer: outer.min(2.0 * rho), eps: rho.min(0.5), spheres: &spheres, weight: &inner };
    let b = Piece { centre: *x, outer, eps, spheres: &spheres, weight: &outer_w };
    let va = integrate_piece(&a, integrand, ord);
    let vb = integrate_piece(&b, integrand, ord);
    let mut o = va;
    for c in 0..N {
        o[c] += vb[c];
    }
    o
}

fn max_diff<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    (0..N).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max)
}

fn max_abs<const N: usize>(a: &[f64; N]) -> f64 {
    a.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// `int_{|y| <= R} integrand(y) dy`, where `integrand(y) = K(x - y) f(y)` may be singular
/// at `y = x` and non-smooth at `y = 0`; `R` is the smaller of the support radius and
/// the truncation radius `L`.
pub fn integrate_product<const N: usize>(
    integrand: &(dyn Fn(&Vec3) -> [f64; N] + Sync),
    x: &Vec3,
    support: Support,
    spec: &QuadratureSpec,
) -> Result<ConvolutionResult> {
    spec.validate()?;
    let l = spec.box_half_length;
    let outer = match support {
        Support::Ball { radius } => {
            if !(radius > 0.0) {
                return Err(invalid("support", "radius must be positive"));
            }
            if !(l > radius) {
                return Err(invalid("box_half_length", "must exceed the source support radius"));
            }
            radius
        }
        Support::Whole => l,
    };
    let tail = match support {
        Support::Ball { .. } => 0.0,
        Support::Whole => spec.tail_model.bound(x, l),
    };
    let mut prev = integrate_once(integrand, x, outer, spec, spec.level(0));
    let mut prev_est = f64::INFINITY;
    for lev in 1..=spec.max_refinements + 1 {
        let cur = integrate_once(integrand, x, outer, spec, spec.level(lev));
        let est = max_diff(&cur, &prev);
        let scale = max_abs(&cur);
        if est <= spec.rel_tol * scale || est <= spec.abs_tol {
            return Ok(ConvolutionResult { value: cur.to_vec(), error_estimate: est, tail_estimate: tail });
        }
        if est >= prev_est {
            return Err(Error::Quadrature { value: scale, estimate: est });
        }
        if lev == spec.max_refinements + 1 {
            return Ok(ConvolutionResult { value: cur.to_vec(), error_estimate: est, tail_estimate: tail });
        }
        prev = cur;
        prev_est = est;
    }
    unreachable!()
}

/// Scalar convolution `(K * f)(x)` restricted to `|y| <= L`.
pub fn convolve_r3(
    kernel: &(dyn Fn(&Vec3) -> f64 + Sync),
    source: &(dyn Fn(&Vec3) -> f64 + Sync),
    support: Support,
    x: &Vec3,
    spec: &QuadratureSpec,
) -> Result<ConvolutionResult> {
    let integrand = |y: &Vec3| {
        let z = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
        [kernel(&z) * source(y)]
    };
    integrate_product::<1>(&integrand, x, support, spec)
}

/// Complex spatial mode `(k, g_k)`.
pub type ModeFn<'a> = (i64, &'a (dyn Fn(&Vec3) -> Complex64 + Sync));

/// Space-time convolution `(1/T) int_0^T int K(t - s, x - y) f(s, y) dy ds` from the
/// temporal modes of both operands. Returns the complex value `[re, im]`.
pub fn convolve_spacetime(
    kernel_modes: &[ModeFn],
    source_modes: &[ModeFn],
    support: Support,
    t: f64,
    x: &Vec3,
    params: &FlowParams,
    spec: &QuadratureSpec,
) -> Result<ConvolutionResult> {
    if kernel_modes.len() != source_modes.len() {
        return Err(Error::ModeMismatch { kernel: kernel_modes.len(), sources: source_modes.len() });
    }
    let mut total = Complex64::new(0.0, 0.0);
    let (mut err, mut tail) = (0.0, 0.0);
    for ((kk, kern), (ks, src)) in kernel_modes.iter().zip(source_modes) {
        if kk != ks {
            return Err(Error::ModeMismatch { kernel: kernel_modes.len(), sources: source_modes.len() });
        }
        let integrand = |y: &Vec3| {
            let z = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
            let v = kern(&z) * src(y);
            [v.re, v.im]
        };
        let r = integrate_product::<2>(&integrand, x, support, spec)?;
        let phase = Complex64::from_polar(1.0, params.mode_frequency(*kk) * t);
        total += phase * Complex64::new(r.value[0], r.value[1]);
        err += r.error_estimate;
        tail += r.tail_estimate;
    }
    Ok(ConvolutionResult { value: vec![total.re, total.im], error_estimate: err, tail_estimate: tail })
}
