//! Fixed-point residual `X - F_S(u) - H_S` at sample points.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::farfield::{compute_fs, compute_hs, eval_velocity_farfield_steady, eval_vorticity_farfield};
use super::{CutoffSpec, FarFieldSources, FarFieldSpec, ForcingSpec, PicardOutcome, SpectralField, CZERO};
use crate::error::{invalid, Result};
use crate::geom::{norm, CMat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSpec {
    pub rel_tol: f64,
    pub abs_floor: f64,
    /// Collocation times for the periodic vorticity.
    pub times: usize,
    /// Replace the spectral linear part by its whole-space representation, removing the
    /// periodic images of the linear solution.
    pub image_correction: bool,
}

impl Default for ResidualSpec {
    fn default() -> Self {
        Self { rel_tol: 0.05, abs_floor: 1e-9, times: 16, image_correction: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualPoint {
    pub x: Vec3,
    /// `max_t |curl u - curl(F_S + H_S)|` and `max_t |curl u|`.
    pub vorticity_residual: f64,
    pub vorticity_magnitude: f64,
    /// `|v - (F_S + H_S) velocity|` and `|v|` (steady parts).
    pub velocity_residual: f64,
    pub velocity_magnitude: f64,
    /// Quadrature and tail budget of `F_S + H_S`.
    pub budget: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub s: f64,
    pub spec: ResidualSpec,
    pub points: Vec<ResidualPoint>,
    /// Largest `residual / (rel_tol |field| + abs_floor)`.
    pub worst_ratio: f64,
    pub passed: bool,
}

/// `count` seeded points with `|x|` uniform in `[lo, hi]` and uniform directions.
pub fn residual_points(count: usize, lo: f64, hi: f64, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let r = rng.random_range(lo..=hi);
            let c: f64 = rng.random_range(-1.0..=1.0);
            let ph: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let st = (1.0 - c * c).sqrt();
            [r * c, r * st * ph.cos(), r * st * ph.sin()]
        })
        .collect()
}

fn curl(d: &CMat3) -> [Complex64; 3] {
    [d[2][1] - d[1][2], d[0][2] - d[2][0], d[1][0] - d[0][1]]
}

/// Residual of the split fixed-point identity for a converged Picard outcome.
pub fn fixedpoint_residual(
    outcome: &PicardOutcome,
    forcing: &ForcingSpec,
    cutoff: &CutoffSpec,
    points: &[Vec3],
    far: &FarFieldSpec,
    spec: &ResidualSpec,
) -> Result<ResidualReport> {
    if points.is_empty() {
        return Err(crate::error::Error::EmptySamples);
    }
    if spec.times == 0 {
        return Err(invalid("times", "must be positive"));
    }
    let params = outcome.field.params;
    let k_max = outcome.field.k_max;
    let sources = FarFieldSources::from_nonlinear(&outcome.nonlinear, Some(forcing));
    let linear = FarFieldSources::forcing_only(forcing, params);
    let spectral = if spec.image_correction {
        SpectralField::from_field(&outcome.field.sub(&outcome.linear))
    } else {
        SpectralField::from_field(&outcome.field)
    };
    let mut out = Vec::with_capacity(points.len());
    for x in points {
        // X: steady velocity and vorticity modes 0..=K
        let mut vel = [0.0; 3];
        let mut vort: Vec<[Complex64; 3]> = vec![[CZERO; 3]; k_max + 1];
        for k in 0..=k_max as i64 {
            let (v, d) = spectral.eval(k, x);
            if k == 0 {
                vel = [v[0].re, v[1].re, v[2].re];
            }
            vort[k as usize] = curl(&d);
        }
        if spec.image_correction {
            let v = eval_velocity_farfield_steady(x, &linear, far)?;
            let w = eval_vorticity_farfield(x, &linear, far)?;
            for i in 0..3 {
                vel[i] += v.steady[i];
                vort[0][i] += w.steady[i];
            }
            for (k, m) in &w.modes {
                for i in 0..3 {
                    vort[*k as usize][i] += m[i];
                }
            }
        }
        let split = compute_fs(&sources, cutoff, x, far)?.combined(&compute_hs(&sources, cutoff, x, far)?);
        let rv: Vec<f64> = (0..3).map(|i| vel[i] - split.velocity.steady[i]).collect();
        let mut diff = vort.clone();
        for i in 0..3 {
            diff[0][i] -= split.vorticity.steady[i];
        }
        for (k, m) in &split.vorticity.modes {
            if (*k as usize) <= k_max {
                for i in 0..3 {
                    diff[*k as usize][i] -= m[i];
                }
            }
        }
        let at = |modes: &[[Complex64; 3]], t: f64| -> f64 {
            let mut s = [0.0; 3];
            for (k, m) in modes.iter().enumerate() {
                let ph = if k == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::from_polar(2.0, params.mode_frequency(k as i64) * t)
                };
                for i in 0..3 {
                    s[i] += (ph * m[i]).re;
                }
            }
            norm(&s)
        };
        let (mut res_w, mut mag_w) = (0.0f64, 0.0f64);
        for j in 0..spec.times {
            let t = params.period * j as f64 / spec.times as f64;
            res_w = res_w.max(at(&diff, t));
            mag_w = mag_w.max(at(&vort, t));
        }
        let res_v = norm(&[rv[0], rv[1], rv[2]]);
        let mag_v = norm(&vel);
        let allow = |m: f64| spec.rel_tol * m + spec.abs_floor;
        let ratio = (res_w / allow(mag_w)).max(res_v / allow(mag_v));
        out.push((
            ratio,
            ResidualPoint {
                x: *x,
                vorticity_residual: res_w,
                vorticity_magnitude: mag_w,
                velocity_residual: res_v,
                velocity_magnitude: mag_v,
                budget: split.velocity.error_estimate
                    + split.velocity.tail_estimate
                    + split.vorticity.error_estimate
                    + split.vorticity.tail_estimate,
                passed: ratio <= 1.0,
            },
        ));
    }
    let worst = out.iter().map(|(r, _)| *r).fold(0.0, f64::max);
    Ok(ResidualReport {
        s: cutoff.s,
        spec: *spec,
        points: out.into_iter().map(|(_, p)| p).collect(),
        worst_ratio: worst,
        passed: worst <= 1.0,
    })
}
