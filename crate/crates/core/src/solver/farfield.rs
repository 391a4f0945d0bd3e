//! Far-field evaluation through the representation formulas.
//!
//! Sources split into the compactly supported forcing, integrated by ball cubature
//! against the whole-space kernels, and the nonlinearity `A(u)` sampled on the solver
//! grid, integrated by [`convolve_grid`](crate::quadrature::convolve_grid). Periodic
//! velocity kernels act on grid sources through `Gamma_H * (Leray A_k)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spectral::{leray_project, nonlinear_modes};
use super::{CutoffSpec, ForcingSpec, TimePeriodicField, CZERO};
use crate::error::{invalid, Error, Result};
use crate::geom::{ccross, cross, norm, sub, CVec3, Vec3};
use crate::periodic::{gamma_perp_mode, grad_gamma_perp_mode, ExpKernel};
use crate::quadrature::{
    convolve_grid_aux, gauss_legendre, integrate_product, ConvolutionResult, GridSource, QuadratureSpec, Support,
};
use crate::special::FlowParams;
use crate::steady::{gamma0_unchecked, grad_gamma0_unchecked, grad_phi0_unchecked};

/// Far-field quadrature controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarFieldSpec {
    /// Grid convolution controls (near-field orders, stride).
    pub quadrature: QuadratureSpec,
    /// Ball cubature orders (radial, polar, azimuth) for the forcing.
    pub ball_orders: [usize; 3],
    /// Ball cubature orders for the per-mode velocity kernel against the forcing.
    pub perp_orders: [usize; 3],
    /// Tolerance passed to the per-mode velocity kernel.
    pub perp_tol: f64,
    /// Tail estimate as a multiple of the outer-shell (`|y|_inf >= 3L/4`) contribution.
    pub tail_factor: f64,
    /// Evaluate periodic velocity parts of `F_S`/`H_S` (experimental kernel).
    pub periodic_velocity: bool,
}

impl Default for FarFieldSpec {
    fn default() -> Self {
        Self {
            quadrature: QuadratureSpec::default(),
            ball_orders: [12, 12, 24],
            perp_orders: [6, 6, 12],
            perp_tol: 1e-5,
            tail_factor: 8.0,
            periodic_velocity: false,
        }
    }
}

/// Far-field value: steady part and the modes `k > 0` of the purely periodic part
/// (mode `-k` is the conjugate). Vector layouts are documented per evaluator.
#[derive(Debug, Clone, PartialEq)]
pub struct FarValue {
    pub steady: Vec<f64>,
    pub modes: Vec<(i64, Vec<Complex64>)>,
    pub error_estimate: f64,
    pub tail_estimate: f64,
}

impl FarValue {
    fn zeros(len: usize, k_max: usize) -> Self {
        Self {
            steady: vec![0.0; len],
            modes: (1..=k_max as i64).map(|k| (k, vec![CZERO; len])).collect(),
            error_estimate: 0.0,
            tail_estimate: 0.0,
        }
    }

    /// Purely periodic part at time `t`.
    pub fn periodic_at(&self, params: &FlowParams, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.steady.len()];
        for (k, m) in &self.modes {
            let ph = Complex64::from_polar(2.0, params.mode_frequency(*k) * t);
            for (o, v) in out.iter_mut().zip(m) {
                *o += (ph * v).re;
            }
        }
        out
    }

    /// `sup_t |P_perp part|` over `times` equispaced collocation times, restricted to
    /// the components `range`.
    pub fn periodic_sup(&self, params: &FlowParams, times: usize, range: std::ops::Range<usize>) -> f64 {
        (0..times)
            .map(|j| {
                let v = self.periodic_at(params, params.period * j as f64 / times as f64);
                v[range.clone()].iter().map(|a| a * a).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Full value (steady plus periodic) at time `t`.
    pub fn at(&self, params: &FlowParams, t: f64) -> Vec<f64> {
        let mut v = self.periodic_at(params, t);
        v.iter_mut().zip(&self.steady).for_each(|(a, b)| *a += b);
        v
    }

    fn absorb(&mut self, other: &FarValue) {
        self.steady.iter_mut().zip(&other.steady).for_each(|(a, b)| *a += b);
        for (k, m) in &other.modes {
            match self.modes.iter_mut().find(|(j, _)| j == k) {
                Some((_, mine)) => mine.iter_mut().zip(m).for_each(|(a, b)| *a += b),
                None => self.modes.push((*k, m.clone())),
            }
        }
        self.error_estimate += other.error_estimate;
        self.tail_estimate += other.tail_estimate;
    }
}

/// Sources of the representation formulas.
#[derive(Debug, Clone)]
pub struct FarFieldSources {
    pub params: FlowParams,
    pub forcing: Option<ForcingSpec>,
    pub k_max: usize,
    /// `A_k`, `k = 0..=K`, channels `(re, im)` per component.
    nonlinear: Vec<Option<GridSource>>,
    /// Leray projection of `A_k`.
    projected: Vec<Option<GridSource>>,
}

fn grid_source(field: &TimePeriodicField, k: i64) -> Option<GridSource> {
    let g = field.grid;
    let n = g.n;
    let mode = field.mode(k);
    if mode.iter().all(|v| v.iter().all(|c| c.norm() == 0.0)) {
        return None;
    }
    let mut values = Vec::with_capacity(g.len() * 6);
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                let v = mode[g.index(i, j, l)];
                for c in v {
                    values.push(c.re);
                    values.push(c.im);
                }
            }
        }
    }
    GridSource::new(n, g.half_length, 6, values).ok()
}

impl FarFieldSources {
    /// Sources for the solution `u`: `A(u)` is evaluated pseudo-spectrally.
    pub fn from_solution(u: &TimePeriodicField, forcing: Option<&ForcingSpec>) -> Self {
        Self::from_nonlinear(&nonlinear_modes(u), forcing)
    }

    /// Sources from precomputed nonlinear modes `A_k`.
    pub fn from_nonlinear(a: &TimePeriodicField, forcing: Option<&ForcingSpec>) -> Self {
        let p = leray_project(a);
        let ks = 0..=a.k_max as i64;
        Self {
            params: a.params,
            forcing: forcing.cloned(),
            k_max: a.k_max,
            nonlinear: ks.clone().map(|k| grid_source(a, k)).collect(),
            projected: ks.map(|k| grid_source(&p, k)).collect(),
        }
    }

    /// Linear sources: the forcing alone.
    pub fn forcing_only(forcing: &ForcingSpec, params: FlowParams) -> Self {
        let k_max = forcing.max_mode();
        Self {
            params,
            forcing: Some(forcing.clone()),
            k_max,
            nonlinear: vec![None; k_max + 1],
            projected: vec![None; k_max + 1],
        }
    }

    fn check_point(&self, x: &Vec3, use_forcing: bool) -> Result<()> {
        if let (true, Some(f)) = (use_forcing, &self.forcing) {
            if norm(&sub(x, &f.center)) <= f.radius {
                return Err(invalid("x", "inside the forcing support"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum Weight {
    One,
    Chi(CutoffSpec),
    OneMinusChi(CutoffSpec),
}

impl Weight {
    fn at(&self, y: &Vec3) -> f64 {
        match self {
            Weight::One => 1.0,
            Weight::Chi(c) => c.chi(y),
            Weight::OneMinusChi(c) => 1.0 - c.chi(y),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Select {
    forcing: bool,
    weight: Weight,
}

const ALL: Select = Select { forcing: true, weight: Weight::One };

fn ball_sum<const N: usize>(f: &(dyn Fn(&Vec3) -> [f64; N] + Sync), c: &Vec3, rho: f64, orders: [usize; 3]) -> [f64; N] {
    let rr = gauss_legendre(orders[0]);
    let rp = gauss_legendre(orders[1]);
    let na = orders[2];
    let terms: Vec<[f64; N]> = rp
        .par_iter()
        .map(|&(mu, wm)| {
            let st = (1.0 - mu * mu).sqrt();
            let mut acc = [0.0; N];
            for a in 0..na {
                let ph = 2.0 * std::f64::consts::PI * (a as f64 + 0.5) / na as f64;
                let d = [mu, st * ph.cos(), st * ph.sin()];
                for &(tr, wr) in rr {
                    let r = 0.5 * rho * (tr + 1.0);
                    let w = 0.5 * rho * wr * r * r * wm * 2.0 * std::f64::consts::PI / na as f64;
                    let v = f(&[c[0] + r * d[0], c[1] + r * d[1], c[2] + r * d[2]]);
                    for i in 0..N {
                        acc[i] += w * v[i];
                    }
                }
            }
            acc
        })
        .collect();
    crate::geom::pairwise_sum(&terms, [0.0; N], &|a, b| {
        let mut o = a;
        for i in 0..N {
            o[i] += b[i];
        }
        o
    })
}

/// `int_{ball} integrand(y) dy` over the forcing support with an error estimate.
fn ball_integrate<const N: usize>(
    integrand: &(dyn Fn(&Vec3) -> [f64; N] + Sync),
    forcing: &ForcingSpec,
    x: &Vec3,
    spec: &FarFieldSpec,
) -> Result<([f64; N], f64)> {
    let c = forcing.center;
    let rho = forcing.radius;
    if norm(&sub(x, &c)) < 1.5 * rho {
        let shifted = |y: &Vec3| integrand(&[y[0] + c[0], y[1] + c[1], y[2] + c[2]]);
        let q = QuadratureSpec { box_half_length: 2.0 * rho, ..spec.quadrature };
        let r = integrate_product(&shifted, &sub(x, &c), Support::Ball { radius: rho }, &q)?;
        let mut v = [0.0; N];
        v.copy_from_slice(&r.value);
        return Ok((v, r.error_estimate));
    }
    let o = spec.ball_orders;
    let fine = ball_sum(integrand, &c, rho, o);
    let coarse = ball_sum(integrand, &c, rho, [o[0] * 2 / 3, o[1] * 2 / 3, o[2] * 2 / 3]);
    let est = fine.iter().zip(&coarse).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok((fine, est))
}

/// Grid convolution with weight `w(y)`; the last channel of `kernel` is reserved for
/// the outer-shell magnitude that feeds the tail estimate.
fn grid_conv<const N: usize>(
    src: &GridSource,
    x: &Vec3,
    spec: &FarFieldSpec,
    weight: Weight,
    kernel: &(dyn Fn(&Vec3, &[f64]) -> [f64; N] + Sync),
) -> Result<ConvolutionResult> {
    let shell = 0.75 * src.half_length;
    let prod = |z: &Vec3, f: &[f64]| {
        let y = sub(x, z);
        let w = weight.at(&y);
        if w == 0.0 {
            return [0.0; N];
        }
        let mut v = kernel(z, f);
        let mut mag = 0.0;
        for c in v.iter_mut().take(N - 1) {
            *c *= w;
            mag += *c * *c;
        }
        v[N - 1] = if y.iter().any(|a| a.abs() >= shell) { mag.sqrt() } else { 0.0 };
        v
    };
    let mut r = convolve_grid_aux(&prod, src, x, &spec.quadrature)?;
    r.tail_estimate *= spec.tail_factor;
    Ok(r)
}

fn cvec(f: &[f64]) -> CVec3 {
    [Complex64::new(f[0], f[1]), Complex64::new(f[2], f[3]), Complex64::new(f[4], f[5])]
}

fn vorticity(x: &Vec3, src: &FarFieldSources, spec: &FarFieldSpec, sel: Select) -> Result<FarValue> {
    src.check_point(x, sel.forcing)?;
    let lam = src.params.lambda;
    let mut out = FarValue::zeros(3, src.k_max);
    if let (true, Some(f)) = (sel.forcing, &src.forcing) {
        let steady = |y: &Vec3| {
            let g = grad_phi0_unchecked(&sub(x, y), lam);
            let s = f.mode_value(0, y);
            cross(&g, &[s[0].re, s[1].re, s[2].re])
        };
        let (v, e) = ball_integrate::<3>(&steady, f, x, spec)?;
        out.steady.copy_from_slice(&v);
        out.error_estimate += e;
        for (k, m) in out.modes.iter_mut() {
            if f.modes.iter().all(|c| c.k != *k) {
                continue;
            }
            let kern = ExpKernel::helmholtz(src.params.mode_frequency(*k), lam);
            let kk = *k;
            let integrand = |y: &Vec3| {
                let c = ccross(&kern.gradient(&sub(x, y)), &f.mode_value(kk, y));
                [c[0].re, c[0].im, c[1].re, c[1].im, c[2].re, c[2].im]
            };
            let (v, e) = ball_integrate::<6>(&integrand, f, x, spec)?;
            for i in 0..3 {
                m[i] += Complex64::new(v[2 * i], v[2 * i + 1]);
            }
            out.error_estimate += e;
        }
    }
    if let Some(a0) = &src.nonlinear[0] {
        let kern = |z: &Vec3, f: &[f64]| {
            let c = cross(&grad_phi0_unchecked(z, lam), &[f[0], f[2], f[4]]);
            [c[0], c[1], c[2], 0.0]
        };
        let r = grid_conv::<4>(a0, x, spec, sel.weight, &kern)?;
        out.steady.iter_mut().zip(&r.value).for_each(|(a, b)| *a += b);
        out.error_estimate += r.error_estimate;
        out.tail_estimate += r.tail_estimate;
    }
    for (k, m) in out.modes.iter_mut() {
        let Some(ak) = &src.nonlinear[*k as usize] else { continue };
        let gk = ExpKernel::helmholtz(src.params.mode_frequency(*k), lam);
        let kern = |z: &Vec3, f: &[f64]| {
            let c = ccross(&gk.gradient(z), &cvec(f));
            [c[0].re, c[0].im, c[1].re, c[1].im, c[2].re, c[2].im, 0.0]
        };
        let r = grid_conv::<7>(ak, x, spec, sel.weight, &kern)?;
        for i in 0..3 {
            m[i] += Complex64::new(r.value[2 * i], r.value[2 * i + 1]);
        }
        out.error_estimate += r.error_estimate;
        out.tail_estimate += r.tail_estimate;
    }
    Ok(out)
}

fn steady_velocity(x: &Vec3, src: &FarFieldSources, spec: &FarFieldSpec, sel: Select) -> Result<FarValue> {
    src.check_point(x, sel.forcing)?;
    let lam = src.params.lambda;
    let mut out = FarValue::zeros(12, 0);
    // [v_0..v_2, d_j v_i at 3 + 3 i + j]
    let pack = |z: &Vec3, s: &Vec3| {
        let g = gamma0_unchecked(z, lam);
        let dg = grad_gamma0_unchecked(z, lam);
        let mut o = [0.0; 13];
        for i in 0..3 {
            for l in 0..3 {
                o[i] += g[i][l] * s[l];
                for j in 0..3 {
                    o[3 + 3 * i + j] += dg[j][i][l] * s[l];
                }
            }
        }
        o
    };
    if let (true, Some(f)) = (sel.forcing, &src.forcing) {
        let integrand = |y: &Vec3| {
            let s = f.mode_value(0, y);
            let o = pack(&sub(x, y), &[s[0].re, s[1].re, s[2].re]);
            let mut v = [0.0; 12];
            v.copy_from_slice(&o[..12]);
            v
        };
        let (v, e) = ball_integrate::<12>(&integrand, f, x, spec)?;
        out.steady.copy_from_slice(&v);
        out.error_estimate += e;
    }
    if let Some(a0) = &src.nonlinear[0] {
        let kern = |z: &Vec3, f: &[f64]| pack(z, &[f[0], f[2], f[4]]);
        let r = grid_conv::<13>(a0, x, spec, sel.weight, &kern)?;
        out.steady.iter_mut().zip(&r.value).for_each(|(a, b)| *a += b);
        out.error_estimate += r.error_estimate;
        out.tail_estimate += r.tail_estimate;
    }
    Ok(out)
}

fn periodic_velocity(x: &Vec3, src: &FarFieldSources, spec: &FarFieldSpec, sel: Select) -> Result<FarValue> {
    src.check_point(x, sel.forcing)?;
    let lam = src.params.lambda;
    let mut out = FarValue::zeros(12, src.k_max);
    for (k, m) in out.modes.iter_mut() {
        let kk = *k;
        if let (true, Some(f)) = (sel.forcing, &src.forcing) {
            if f.modes.iter().any(|c| c.k == kk) {
                let c = f.center;
                if norm(&sub(x, &c)) < 1.5 * f.radius {
                    return Err(invalid("x", "periodic velocity needs |x - x0| >= 1.5 rho"));
                }
                let tol = spec.perp_tol;
                let fail = std::sync::Mutex::new(None);
                let integrand = |y: &Vec3| {
                    let z = sub(x, y);
                    let s = f.mode_value(kk, y);
                    let (g, e1) = match gamma_perp_mode(kk, &z, &src.params, tol) {
                        Ok(v) => v,
                        Err(e) => {
                            *fail.lock().unwrap() = Some(e);
                            return [0.0; 25];
                        }
                    };
                    let (dg, e2) = match grad_gamma_perp_mode(kk, &z, &src.params, tol) {
                        Ok(v) => v,
                        Err(e) => {
                            *fail.lock().unwrap() = Some(e);
                            return [0.0; 25];
                        }
                    };
                    let mut o = [0.0; 25];
                    let mut acc = [CZERO; 12];
                    for i in 0..3 {
                        for l in 0..3 {
                            acc[i] += g[i][l] * s[l];
                            for j in 0..3 {
                                acc[3 + 3 * i + j] += dg[j][i][l] * s[l];
                            }
                        }
                    }
                    for (q, a) in acc.iter().enumerate() {
                        o[2 * q] = a.re;
                        o[2 * q + 1] = a.im;
                    }
                    let smag = s.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                    o[24] = (e1 + e2) * smag;
                    o
                };
                let o = spec.perp_orders;
                let fine = ball_sum::<25>(&integrand, &c, f.radius, o);
                let coarse = ball_sum::<25>(&integrand, &c, f.radius, [o[0] * 2 / 3, o[1] * 2 / 3, o[2] * 2 / 3]);
                if let Some(e) = fail.into_inner().unwrap() {
                    return Err(e);
                }
                for q in 0..12 {
                    m[q] += Complex64::new(fine[2 * q], fine[2 * q + 1]);
                }
                let est = (0..24).map(|q| (fine[q] - coarse[q]).abs()).fold(0.0, f64::max);
                out.error_estimate += est + fine[24];
            }
        }
        let Some(pk) = &src.projected[kk as usize] else { continue };
        let gk = ExpKernel::helmholtz(src.params.mode_frequency(kk), lam);
        let kern = |z: &Vec3, f: &[f64]| {
            let s = cvec(f);
            let v = gk.value(z);
            let d = gk.gradient(z);
            let mut o = [0.0; 25];
            for i in 0..3 {
                let a = v * s[i];
                o[2 * i] = a.re;
                o[2 * i + 1] = a.im;
                for j in 0..3 {
                    let b = d[j] * s[i];
                    o[2 * (3 + 3 * i + j)] = b.re;
                    o[2 * (3 + 3 * i + j) + 1] = b.im;
                }
            }
            o
        };
        let r = grid_conv::<25>(pk, x, spec, sel.weight, &kern)?;
        for q in 0..12 {
            m[q] += Complex64::new(r.value[2 * q], r.value[2 * q + 1]);
        }
        out.error_estimate += r.error_estimate;
        out.tail_estimate += r.tail_estimate;
    }
    Ok(out)
}

/// `curl v` (steady) and the modes of `curl w`: length-3 vectors.
pub fn eval_vorticity_farfield(x: &Vec3, sources: &FarFieldSources, spec: &FarFieldSpec) -> Result<FarValue> {
    vorticity(x, sources, spec, ALL)
}

/// Steady velocity `v` and gradient: entries `0..3` are `v`, entry `3 + 3 i + j` is `d_j v_i`.
pub fn eval_velocity_farfield_steady(x: &Vec3, sources: &FarFieldSources, spec: &FarFieldSpec) -> Result<FarValue> {
    steady_velocity(x, sources, spec, ALL)
}

/// Modes of the purely periodic velocity `w` and its gradient, laid out as in
/// [`eval_velocity_farfield_steady`]. The forcing part uses the per-mode velocity
/// kernel; grid sources use `Gamma_H * (Leray A_k)`.
pub fn eval_velocity_farfield_periodic(x: &Vec3, sources: &FarFieldSources, spec: &FarFieldSpec) -> Result<FarValue> {
    periodic_velocity(x, sources, spec, ALL)
}

/// Parts of `F_S` or `H_S` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitParts {
    /// Steady velocity and gradient (layout of [`eval_velocity_farfield_steady`]).
    pub velocity: FarValue,
    /// Steady vorticity and the vorticity modes.
    pub vorticity: FarValue,
    /// Periodic velocity modes when enabled in the spec.
    pub periodic_velocity: Option<FarValue>,
}

fn split(x: &Vec3, src: &FarFieldSources, spec: &FarFieldSpec, sel: Select) -> Result<SplitParts> {
    Ok(SplitParts {
        velocity: steady_velocity(x, src, spec, sel)?,
        vorticity: vorticity(x, src, spec, sel)?,
        periodic_velocity: if spec.periodic_velocity { Some(periodic_velocity(x, src, spec, sel)?) } else { None },
    })
}

/// `H_S`: kernels against `f + chi_S A(u)`.
pub fn compute_hs(sources: &FarFieldSources, cutoff: &CutoffSpec, x: &Vec3, spec: &FarFieldSpec) -> Result<SplitParts> {
    split(x, sources, spec, Select { forcing: true, weight: Weight::Chi(*cutoff) })
}

/// `F_S(z)`: kernels against `(1 - chi_S) A(z)`; defined for `|x| > S` only.
pub fn compute_fs(sources: &FarFieldSources, cutoff: &CutoffSpec, x: &Vec3, spec: &FarFieldSpec) -> Result<SplitParts> {
    let r = norm(x);
    if r <= cutoff.s {
        return Err(Error::InsideCutoff { radius: r, s: cutoff.s });
    }
    split(x, sources, spec, Select { forcing: false, weight: Weight::OneMinusChi(*cutoff) })
}

impl SplitParts {
    /// Sum of two splittings (e.g. `F_S + H_S`).
    pub fn combined(&self, other: &SplitParts) -> SplitParts {
        let mut out = self.clone();
        out.velocity.absorb(&other.velocity);
        out.vorticity.absorb(&other.vorticity);
        out.periodic_velocity = match (&self.periodic_velocity, &other.periodic_velocity) {
            (Some(a), Some(b)) => {
                let mut c = a.clone();
                c.absorb(b);
                Some(c)
            }
            _ => None,
        };
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::{picard_solve, solve_linear, Grid, PicardSpec, SpectralField};
    use super::*;
    use std::f64::consts::PI;

    fn params() -> FlowParams {
        FlowParams::new(1.0, 2.0 * PI).unwrap()
    }

    #[test]
    fn zero_sources_vanish() {
        let g = Grid::new(8, 4.0).unwrap();
        let u = TimePeriodicField::zeros(1, g, params());
        let src = FarFieldSources::from_solution(&u, None);
        let c = CutoffSpec::new(2.0, 1.0).unwrap();
        let spec = FarFieldSpec::default();
        let fs = compute_fs(&src, &c, &[3.0, 0.5, 0.0], &spec).unwrap();
        assert!(fs.velocity.steady.iter().all(|v| *v == 0.0));
        assert!(fs.vorticity.modes.iter().all(|(_, m)| m.iter().all(|c| c.norm() == 0.0)));
        assert!(matches!(compute_fs(&src, &c, &[1.0, 0.0, 0.0], &spec), Err(Error::InsideCutoff { .. })));
    }

    #[test]
    fn steady_forcing_has_no_periodic_vorticity() {
        let mut f = ForcingSpec::standard(0.05, 1.0);
        f.modes.retain(|m| m.k == 0);
        let src = FarFieldSources::forcing_only(&f, params());
        let v = eval_vorticity_farfield(&[3.0, 1.0, 0.0], &src, &FarFieldSpec::default()).unwrap();
        assert!(v.modes.is_empty());
        assert!(norm(&[v.steady[0], v.steady[1], v.steady[2]]) > 0.0);
    }

    #[test]
    fn representation_matches_spectral_linear_solution() {
        // h = 1/4 resolves the bump; off-wake points see the wakes of periodic images
        let g = Grid::new(96, 12.0).unwrap();
        let p = params();
        let f = ForcingSpec::standard(0.05, 1.0);
        let u = solve_linear(&f, &p, &g, 1).unwrap();
        let s = SpectralField::from_field(&u);
        let src = FarFieldSources::forcing_only(&f, p);
        let spec = FarFieldSpec::default();
        for x in [[-2.5, 0.7, 0.0], [0.0, 2.5, 0.0]] {
            let w = eval_vorticity_farfield(&x, &src, &spec).unwrap();
            for k in [0i64, 1] {
                let (_, d) = s.eval(k, &x);
                let curl = [d[2][1] - d[1][2], d[0][2] - d[2][0], d[1][0] - d[0][1]];
                let quad: Vec<Complex64> = if k == 0 {
                    w.steady.iter().map(|v| Complex64::new(*v, 0.0)).collect()
                } else {
                    w.modes[0].1.clone()
                };
                let scale = curl.iter().map(|c| c.norm()).fold(0.0, f64::max);
                for i in 0..3 {
                    assert!((curl[i] - quad[i]).norm() < 3e-2 * scale, "k={k} x={x:?} {curl:?} vs {quad:?}");
                }
            }
            let v = eval_velocity_farfield_steady(&x, &src, &spec).unwrap();
            let (_, sd) = s.eval(0, &x);
            let scale = sd.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
            // the box velocity has zero mean, so compare gradients
            for i in 0..3 {
                for j in 0..3 {
                    let q = v.steady[3 + 3 * i + j];
                    assert!((sd[i][j].re - q).abs() < 5e-2 * scale, "{i}{j}: {} vs {q}", sd[i][j].re);
                }
            }
        }
    }

    #[test]
    fn periodic_velocity_matches_spectral_mode() {
        let g = Grid::new(96, 12.0).unwrap();
        let p = params();
        let f = ForcingSpec::standard(0.05, 1.0);
        let u = solve_linear(&f, &p, &g, 1).unwrap();
        let s = SpectralField::from_field(&u);
        let src = FarFieldSources::forcing_only(&f, p);
        let x = [2.0, 1.5, 0.0];
        let w = eval_velocity_farfield_periodic(&x, &src, &FarFieldSpec::default()).unwrap();
        let (sv, _) = s.eval(1, &x);
        let scale = sv.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for i in 0..3 {
            assert!((sv[i] - w.modes[0].1[i]).norm() < 0.05 * scale, "{sv:?} vs {:?}", w.modes[0].1);
        }
    }

    #[test]
    fn split_sums_to_full_representation() {
        let g = Grid::new(24, 8.0).unwrap();
        let p = params();
        let f = ForcingSpec::standard(0.05, 1.0);
        let out = picard_solve(&f, &p, &g, 1, &PicardSpec { tol: 1e-8, ..Default::default() }).unwrap();
        let src = FarFieldSources::from_nonlinear(&out.nonlinear, Some(&f));
        let c = CutoffSpec::new(2.0, 1.0).unwrap();
        let spec = FarFieldSpec::default();
        let x = [3.0, 1.0, 0.5];
        let h = compute_hs(&src, &c, &x, &spec).unwrap();
        let fs = compute_fs(&src, &c, &x, &spec).unwrap();
        let sum = h.combined(&fs);
        let full = eval_vorticity_farfield(&x, &src, &spec).unwrap();
        for i in 0..3 {
            assert!((sum.vorticity.steady[i] - full.steady[i]).abs() <= 1e-12 + 1e-9 * full.steady[i].abs());
        }
    }
}
