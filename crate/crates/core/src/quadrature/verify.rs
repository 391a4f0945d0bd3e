//! Numerical checks of the convolution estimates for wake-weighted functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{integrate_product, QuadratureSpec, Support, TailModel};
use crate::error::{invalid, Result};
use crate::geom::{norm, tensor_norm, mat_norm, Vec3};
use crate::special::{wake, FlowParams};
use crate::steady::{gamma0_unchecked, grad_gamma0_unchecked};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierRow {
    pub ray: String,
    pub radius: f64,
    pub x: Vec3,
    pub value: f64,
    /// Value of the claimed decay profile at `x`.
    pub profile: f64,
    pub ratio: f64,
    pub error_estimate: f64,
    pub tail_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierReport {
    pub name: String,
    pub parameters: Vec<(String, f64)>,
    pub in_hypothesis: bool,
    pub rows: Vec<VerifierRow>,
    pub sup_ratio: f64,
}

/// `count` log-spaced radii covering `[lo, hi]`.
pub fn window_radii(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![lo];
    }
    (0..count).map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64)).collect()
}

/// Relative change `|b - a| / a` of the sup ratios of two windows.
pub fn window_change(a: &VerifierReport, b: &VerifierReport) -> f64 {
    (b.sup_ratio - a.sup_ratio).abs() / a.sup_ratio
}

fn verifier_spec(tail: TailModel) -> QuadratureSpec {
    QuadratureSpec { tail_model: tail, rel_tol: 1e-3, azimuth_count: 48, max_refinements: 1, ..QuadratureSpec::default() }
}

fn rays() -> [(&'static str, Vec3); 2] {
    [("wake", [-1.0, 0.0, 0.0]), ("off_axis", [0.0, 1.0, 0.0])]
}

/// `sup |z|^p |K(z)|` over `|z| >= r0`, sampled on a few shells and directions, doubled.
fn kernel_coef(k: &dyn Fn(&Vec3) -> f64, p: f64, r0: f64) -> f64 {
    let mut best: f64 = 0.0;
    for s in 0..5 {
        let r = r0 * 2f64.powi(s);
        for i in 0..=64 {
            let th = std::f64::consts::PI * i as f64 / 64.0;
            let z = [r * th.cos(), r * th.sin(), 0.0];
            best = best.max(r.powf(p) * k(&z));
        }
    }
    2.0 * best
}

fn run_rays(
    radii: &[f64],
    ray_list: &[(&'static str, Vec3)],
    integrand: &(dyn Fn(&Vec3, &Vec3) -> f64 + Sync),
    profile: &dyn Fn(&Vec3) -> f64,
    tail_for: &dyn Fn(&Vec3) -> TailModel,
) -> Result<(Vec<VerifierRow>, f64)> {
    let mut rows = Vec::new();
    let mut sup: f64 = 0.0;
    for (name, dir) in ray_list {
        for &r in radii {
            let x = [r * dir[0], r * dir[1], r * dir[2]];
            let f = |y: &Vec3| [integrand(&x, y)];
            let spec = verifier_spec(tail_for(&x));
            let res = integrate_product::<1>(&f, &x, Support::Whole, &spec)?;
            let pr = profile(&x);
            let ratio = res.value[0] / pr;
            sup = sup.max(ratio);
            rows.push(VerifierRow {
                ray: name.to_string(),
                radius: r,
                x,
                value: res.value[0],
                profile: pr,
                ratio,
                error_estimate: res.error_estimate,
                tail_estimate: res.tail_estimate,
            });
        }
    }
    Ok((rows, sup))
}

/// `|D^a Gamma_0| * g` with `g(y) = m (1 + |y|)^{-a} (1 + s(y))^{-b}`, compared with
/// `[(1 + |x|)(1 + s(lambda x))]^{-1 - |a|/2}` on the wake axis and a perpendicular ray.
pub fn verify_farwig_scaled(a: f64, b: f64, m: f64, deriv_order: usize, params: &FlowParams, radii: &[f64]) -> Result<VerifierReport> {
    if deriv_order > 1 {
        return Err(invalid("deriv_order", "must be 0 or 1"));
    }
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(invalid("radii", "must be a non-empty list of positive radii"));
    }
    let lam = params.lambda;
    let kernel = move |z: &Vec3| {
        if deriv_order == 0 {
            mat_norm(&gamma0_unchecked(z, lam))
        } else {
            tensor_norm(&grad_gamma0_unchecked(z, lam))
        }
    };
    let g = move |y: &Vec3| m * (1.0 + norm(y)).powf(-a) * (1.0 + wake(y)).powf(-b);
    let integrand = |x: &Vec3, y: &Vec3| {
        let z = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
        kernel(&z) * g(y)
    };
    let e = 1.0 + deriv_order as f64 / 2.0;
    let profile = |x: &Vec3| ((1.0 + norm(x)) * (1.0 + wake(&[lam * x[0], lam * x[1], lam * x[2]]))).powf(-e);
    let p = if deriv_order == 0 { 1.0 } else { 1.5 };
    let l = QuadratureSpec::default().box_half_length;
    let tail_for = |x: &Vec3| TailModel::Algebraic {
        kernel_coef: kernel_coef(&kernel, p, l - norm(x)),
        kernel_power: p,
        source_coef: m,
        source_power: a,
    };
    let (rows, sup) = run_rays(radii, &rays(), &integrand, &profile, &tail_for)?;
    let in_hypothesis = a >= 2.0 && b >= 0.0 && a + b.min(1.0) > 3.0 && (deriv_order == 0 || a + b >= 3.5);
    Ok(VerifierReport {
        name: "farwig".into(),
        parameters: vec![("A".into(), a), ("B".into(), b), ("M".into(), m), ("deriv_order".into(), deriv_order as f64), ("lambda".into(), lam)],
        in_hypothesis,
        rows,
        sup_ratio: sup,
    })
}

/// [`verify_farwig_scaled`] with `m = 1`.
pub fn verify_farwig(a: f64, b: f64, deriv_order: usize, params: &FlowParams, radii: &[f64]) -> Result<VerifierReport> {
    verify_farwig_scaled(a, b, 1.0, deriv_order, params, radii)
}

/// `int |x - y|^{-a} e^{-alpha |x - y|} (1 + |y|)^{-b} dy` against `(1 + |x|)^{-b}`.
pub fn verify_conv_exp(a: f64, b: f64, alpha: f64, radii: &[f64]) -> Result<VerifierReport> {
    if radii.is_empty() || radii.iter().any(|r| !(*r >= 0.0)) {
        return Err(invalid("radii", "must be a non-empty list of non-negative radii"));
    }
    let integrand = |x: &Vec3, y: &Vec3| {
        let d = norm(&[x[0] - y[0], x[1] - y[1], x[2] - y[2]]);
        d.powf(-a) * (-alpha * d).exp() * (1.0 + norm(y)).powf(-b)
    };
    let profile = |x: &Vec3| (1.0 + norm(x)).powf(-b);
    let tail_for = |_: &Vec3| TailModel::Algebraic { kernel_coef: 1.0, kernel_power: a, source_coef: 1.0, source_power: b };
    let (rows, sup) = run_rays(radii, &[("axis", [1.0, 0.0, 0.0])], &integrand, &profile, &tail_for)?;
    Ok(VerifierReport {
        name: "conv_exp".into(),
        parameters: vec![("A".into(), a), ("B".into(), b), ("alpha".into(), alpha)],
        in_hypothesis: a > 0.0 && a < 3.0 && b > 0.0 && alpha > 0.0,
        rows,
        sup_ratio: sup,
    })
}

/// `int [(1 + |x - y|)(1 + s(x - y))]^{-3/2} (1 + |y|)^{-a} (1 + s(y))^{-b} dy` against
/// `(1 + |x|)^{-3/2}`, with `m` scaling the second factor.
pub fn verify_wake_conv_scaled(a: f64, b: f64, m: f64, radii: &[f64]) -> Result<VerifierReport> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(invalid("radii", "must be a non-empty list of positive radii"));
    }
    let integrand = |x: &Vec3, y: &Vec3| {
        let z = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
        ((1.0 + norm(&z)) * (1.0 + wake(&z))).powf(-1.5) * m * (1.0 + norm(y)).powf(-a) * (1.0 + wake(y)).powf(-b)
    };
    let profile = |x: &Vec3| (1.0 + norm(x)).powf(-1.5);
    let tail_for = |_: &Vec3| TailModel::Algebraic { kernel_coef: 1.0, kernel_power: 1.5, source_coef: m, source_power: a };
    let (rows, sup) = run_rays(radii, &rays(), &integrand, &profile, &tail_for)?;
    Ok(VerifierReport {
        name: "wake_conv".into(),
        parameters: vec![("A".into(), a), ("B".into(), b), ("M".into(), m)],
        in_hypothesis: a > 2.0 && b >= 0.0 && a + b.min(1.0) > 3.0,
        rows,
        sup_ratio: sup,
    })
}

/// [`verify_wake_conv_scaled`] with unit scaling.
pub fn verify_wake_conv(a: f64, b: f64, radii: &[f64]) -> Result<VerifierReport> {
    verify_wake_conv_scaled(a, b, 1.0, radii)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpShiftReport {
    pub a: f64,
    pub s: f64,
    pub samples: usize,
    pub seed: u64,
    pub violations: usize,
    /// Minimal `log(rhs) - log(lhs)` for the wake-function inequality.
    pub min_slack_wake: f64,
    /// Minimal `log(rhs) - log(lhs)` for the distance inequality.
    pub min_slack_abs: f64,
    pub passed: bool,
}

/// Log-domain slacks of `e^{-s(a(x-y))} <= e^{4a} e^{-s(ax)/(1+S)}` and
/// `e^{-a|x-y|} <= e^{2a} e^{-a|x|/(1+S)}`.
pub fn exp_shift_slacks(a: f64, s: f64, x: &Vec3, y: &Vec3) -> (f64, f64) {
    let d = [a * (x[0] - y[0]), a * (x[1] - y[1]), a * (x[2] - y[2])];
    let ax = [a * x[0], a * x[1], a * x[2]];
    let wake_slack = (4.0 * a - wake(&ax) / (1.0 + s)) + wake(&d);
    let abs_slack = (2.0 * a - a * norm(x) / (1.0 + s)) + norm(&d);
    (wake_slack, abs_slack)
}

/// Samples `n` pairs `(x, y)` with `|y| <= 2S` and checks both shift inequalities.
/// Half of the `x` samples lie in a narrow cone about the negative `e1` axis.
pub fn verify_exp_shift(a: f64, s: f64, n: usize, seed: u64) -> Result<ExpShiftReport> {
    if !(a > 0.0) || !(s > 0.0) {
        return Err(invalid("a, S", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |rng: &mut ChaCha8Rng| -> Vec3 {
        let c: f64 = rng.random_range(-1.0..=1.0);
        let ph: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let st = (1.0 - c * c).sqrt();
        [c, st * ph.cos(), st * ph.sin()]
    };
    let (mut viol, mut mw, mut ma) = (0usize, f64::INFINITY, f64::INFINITY);
    for i in 0..n {
        let rx = 10f64.powf(rng.random_range(-3.0..4.0));
        let dir = if i % 2 == 0 {
            unit(&mut rng)
        } else {
            let ang: f64 = rng.random_range(0.0..0.05);
            let ph: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            [-ang.cos(), ang.sin() * ph.cos(), ang.sin() * ph.sin()]
        };
        let x = [rx * dir[0], rx * dir[1], rx * dir[2]];
        let ry = 2.0 * s * rng.random::<f64>().cbrt();
        let dy = unit(&mut rng);
        let y = [ry * dy[0], ry * dy[1], ry * dy[2]];
        let (w, ab) = exp_shift_slacks(a, s, &x, &y);
        if w < 0.0 || ab < 0.0 {
            viol += 1;
        }
        mw = mw.min(w);
        ma = ma.min(ab);
    }
    Ok(ExpShiftReport { a, s, samples: n, seed, violations: viol, min_slack_wake: mw, min_slack_abs: ma, passed: viol == 0 })
}
