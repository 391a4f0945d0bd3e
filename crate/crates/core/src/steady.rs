//! Steady Oseen velocity tensor `Gamma0`, steady vorticity kernel `phi0` and bound checkers.
//!
//! `Gamma0 = (delta_jl Delta - d_j d_l) Phi` with the potential
//! `Phi(x) = Ein(s(lambda x)/2) / (4 pi lambda)`. All derivatives are closed-form chain
//! rules through `Ein` and the wake function.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geom::{mat_norm, norm, tensor_norm, Mat3, Tensor333, Vec3};
use crate::special::{ein_derivatives, ein_unchecked, wake, FlowParams};

fn check_nonzero(x: &Vec3) -> Result<f64> {
    let r = norm(x);
    if r == 0.0 || !r.is_finite() {
        return Err(Error::Singular);
    }
    Ok(r)
}

/// `Phi(x) = Ein(s(lambda x)/2)/(4 pi lambda)`.
pub fn oseen_potential(x: &Vec3, params: &FlowParams) -> Result<f64> {
    check_nonzero(x)?;
    let lam = params.lambda;
    Ok(ein_unchecked(0.5 * lam * wake(x)) / (4.0 * PI * lam))
}

struct PotentialJet {
    hess: Mat3,
    third: Tensor333,
}

fn potential_jet(x: &Vec3, lam: f64, want_third: bool) -> PotentialJet {
    let r = norm(x);
    let s = wake(x);
    let a = 0.5 * lam * s;
    let d = ein_derivatives(a);
    let c = 1.0 / (4.0 * PI * lam);
    let (g1, g2, g3) = (c * d[1], c * d[2], c * d[3]);
    let h = 0.5 * lam;
    let aj = [h * s / r, h * x[1] / r, h * x[2] / r];
    let r3 = r * r * r;
    let mut ajl = [[0.0; 3]; 3];
    for j in 0..3 {
        for l in 0..3 {
            let delta = if j == l { 1.0 } else { 0.0 };
            ajl[j][l] = h * (delta / r - x[j] * x[l] / r3);
        }
    }
    let mut hess = [[0.0; 3]; 3];
    for j in 0..3 {
        for l in 0..3 {
            hess[j][l] = g2 * aj[j] * aj[l] + g1 * ajl[j][l];
        }
    }
    let mut third = [[[0.0; 3]; 3]; 3];
    if want_third {
        let r5 = r3 * r * r;
        let delta = |i: usize, k: usize| if i == k { 1.0 } else { 0.0 };
        for m in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    let ajlm = h
                        * (-(delta(j, l) * x[m] + delta(j, m) * x[l] + delta(l, m) * x[j]) / r3
                            + 3.0 * x[j] * x[l] * x[m] / r5);
                    third[m][j][l] = g3 * aj[j] * aj[l] * aj[m]
                        + g2 * (ajl[j][m] * aj[l] + aj[j] * ajl[l][m] + ajl[j][l] * aj[m])
                        + g1 * ajlm;
                }
            }
        }
    }
    PotentialJet { hess, third }
}

/// Steady Oseen tensor `Gamma0(x)`.
pub fn gamma0(x: &Vec3, params: &FlowParams) -> Result<Mat3> {
    check_nonzero(x)?;
    Ok(gamma0_unchecked(x, params.lambda))
}

pub(crate) fn gamma0_unchecked(x: &Vec3, lam: f64) -> Mat3 {
    let jet = potential_jet(x, lam, false);
    let tr = jet.hess[0][0] + jet.hess[1][1] + jet.hess[2][2];
    let mut g = [[0.0; 3]; 3];
    for j in 0..3 {
        for l in 0..3 {
            g[j][l] = -jet.hess[j][l] + if j == l { tr } else { 0.0 };
        }
    }
    g
}

/// Gradient of `Gamma0`, indexed `[m][j][l] = d_m Gamma0_jl`.
pub fn grad_gamma0(x: &Vec3, params: &FlowParams) -> Result<Tensor333> {
    check_nonzero(x)?;
    Ok(grad_gamma0_unchecked(x, params.lambda))
}

pub(crate) fn grad_gamma0_unchecked(x: &Vec3, lam: f64) -> Tensor333 {
    let jet = potential_jet(x, lam, true);
    let mut out = [[[0.0; 3]; 3]; 3];
    for m in 0..3 {
        let lap = jet.third[m][0][0] + jet.third[m][1][1] + jet.third[m][2][2];
        for j in 0..3 {
            for l in 0..3 {
                out[m][j][l] = -jet.third[m][j][l] + if j == l { lap } else { 0.0 };
            }
        }
    }
    out
}

/// Steady vorticity kernel `phi0(x) = exp(-s(lambda x)/2)/(4 pi |x|)`.
pub fn phi0(x: &Vec3, params: &FlowParams) -> Result<f64> {
    let r = check_nonzero(x)?;
    Ok((-0.5 * params.lambda * wake(x)).exp() / (4.0 * PI * r))
}

/// Gradient of `phi0`.
pub fn grad_phi0(x: &Vec3, params: &FlowParams) -> Result<Vec3> {
    check_nonzero(x)?;
    Ok(grad_phi0_unchecked(x, params.lambda))
}

pub(crate) fn grad_phi0_unchecked(x: &Vec3, lam: f64) -> Vec3 {
    let r = norm(x);
    let s = wake(x);
    let p = (-0.5 * lam * s).exp() / (4.0 * PI * r);
    let h = 0.5 * lam;
    let r2 = r * r;
    [
        p * (-x[0] / r2 - h * s / r),
        p * (-x[1] / r2 - h * x[1] / r),
        p * (-x[2] / r2 - h * x[2] / r),
    ]
}

/// Random sample set for bound scans: radii log-uniform in `[r_min, r_max]`,
/// directions uniform on the sphere.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleSpec {
    pub count: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub seed: u64,
}

impl SampleSpec {
    pub fn points(&self) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (lo, hi) = (self.r_min.ln(), self.r_max.ln());
        (0..self.count)
            .map(|_| {
                let r = (lo + (hi - lo) * rng.random::<f64>()).exp();
                let c: f64 = 2.0 * rng.random::<f64>() - 1.0;
                let phi = 2.0 * PI * rng.random::<f64>();
                let st = (1.0 - c * c).max(0.0).sqrt();
                [r * c, r * st * phi.cos(), r * st * phi.sin()]
            })
            .collect()
    }

    fn describe(&self) -> String {
        format!(
            "{} points, |x| log-uniform in [{}, {}], uniform directions, seed {}",
            self.count, self.r_min, self.r_max, self.seed
        )
    }
}

/// Empirical constants `sup |kernel| / shape` over a sample set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelBoundReport {
    pub samples: String,
    pub shape: String,
    /// One constant per derivative order, starting at order 0.
    pub constants: Vec<f64>,
}

/// Sup of `|D^a Gamma0| [|x|(1 + s(lambda x))]^{1 + |a|/2}` for `|a| = 0, 1`.
pub fn verify_gamma0_bounds(params: &FlowParams, spec: &SampleSpec) -> Result<KernelBoundReport> {
    if spec.count == 0 {
        return Err(Error::EmptySamples);
    }
    if !(spec.r_min > 0.0) {
        return Err(crate::error::invalid("r_min", "samples must exclude a ball around 0"));
    }
    let lam = params.lambda;
    let mut c0: f64 = 0.0;
    let mut c1: f64 = 0.0;
    for x in spec.points() {
        let base = norm(&x) * (1.0 + lam * wake(&x));
        c0 = c0.max(mat_norm(&gamma0_unchecked(&x, lam)) * base);
        c1 = c1.max(tensor_norm(&grad_gamma0_unchecked(&x, lam)) * base.powf(1.5));
    }
    Ok(KernelBoundReport {
        samples: spec.describe(),
        shape: "[|x|(1+s(lambda x))]^(-1-|a|/2)".into(),
        constants: vec![c0, c1],
    })
}

/// Sup of `|grad phi0| / ((|x|^-2 + |x|^-3/2 s(lambda x)^1/2) e^{-s(lambda x)/2})`.
pub fn verify_grad_phi0_bound(params: &FlowParams, spec: &SampleSpec) -> Result<KernelBoundReport> {
    if spec.count == 0 {
        return Err(Error::EmptySamples);
    }
    let lam = params.lambda;
    let mut c: f64 = 0.0;
    for x in spec.points() {
        let r = norm(&x);
        let s = lam * wake(&x);
        let shape = (r.powi(-2) + r.powf(-1.5) * s.sqrt()) * (-0.5 * s).exp();
        c = c.max(norm(&grad_phi0_unchecked(&x, lam)) / shape);
    }
    Ok(KernelBoundReport {
        samples: spec.describe(),
        shape: "(|x|^-2 + |x|^-3/2 s(lambda x)^1/2) exp(-s(lambda x)/2)".into(),
        constants: vec![c],
    })
}
