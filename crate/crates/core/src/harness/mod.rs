//! Ray and wake-sheet sampling of far-field quantities, decay fits, weighted norms and
//! the kernel surrogate for the purely periodic vorticity rate.

mod fit;
mod norms;
mod surrogate;

pub use fit::{fit_decay, DecayFitReport, DecaySample, FitWindow};
pub use norms::{weighted_norms, WeightedNorms};
pub use surrogate::{kernel_surrogate_decay, surrogate_samples, KernelTable, SurrogateSource, SurrogateSpec};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geom::Vec3;
use crate::solver::{
    eval_velocity_farfield_periodic, eval_velocity_farfield_steady, eval_vorticity_farfield, FarFieldSources,
    FarFieldSpec,
};
use crate::special::wake;

/// Ray `x1 = theta |x|` or wake sheet `s(x) = sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RayMode {
    Ray { theta: f64 },
    WakeSheet { sigma: f64 },
}

/// Sampling curve with its radii. `azimuth` rotates the curve about the `x1` axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaySpec {
    pub mode: RayMode,
    pub radii: Vec<f64>,
    #[serde(default)]
    pub azimuth: f64,
}

impl RaySpec {
    pub fn ray(theta: f64, radii: Vec<f64>) -> Result<Self> {
        let r = Self { mode: RayMode::Ray { theta }, radii, azimuth: 0.0 };
        r.validate()?;
        Ok(r)
    }

    pub fn wake_sheet(sigma: f64, radii: Vec<f64>) -> Result<Self> {
        let r = Self { mode: RayMode::WakeSheet { sigma }, radii, azimuth: 0.0 };
        r.validate()?;
        Ok(r)
    }

    pub fn with_azimuth(mut self, azimuth: f64) -> Self {
        self.azimuth = azimuth;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(invalid("radii", "must be positive and finite"));
        }
        match self.mode {
            RayMode::Ray { theta } => {
                if !(theta > -1.0 && theta <= 1.0) {
                    return Err(invalid("theta", "must lie in (-1, 1]"));
                }
            }
            RayMode::WakeSheet { sigma } => {
                if !(sigma > 0.0) {
                    return Err(invalid("sigma", "must be positive"));
                }
                if self.radii.iter().any(|r| 2.0 * r * sigma < sigma * sigma) {
                    return Err(invalid("radii", "wake sheet needs 2 r sigma >= sigma^2"));
                }
            }
        }
        Ok(())
    }

    /// `theta` or `sigma`.
    pub fn parameter(&self) -> f64 {
        match self.mode {
            RayMode::Ray { theta } => theta,
            RayMode::WakeSheet { sigma } => sigma,
        }
    }

    /// Point at radius `r`.
    pub fn point(&self, r: f64) -> Vec3 {
        let (x1, rho) = match self.mode {
            RayMode::Ray { theta } => (theta * r, r * (1.0 - theta * theta).max(0.0).sqrt()),
            RayMode::WakeSheet { sigma } => (sigma - r, (2.0 * r * sigma - sigma * sigma).max(0.0).sqrt()),
        };
        [x1, rho * self.azimuth.cos(), rho * self.azimuth.sin()]
    }

    pub fn points(&self) -> Vec<Vec3> {
        self.radii.iter().map(|&r| self.point(r)).collect()
    }
}

/// Which far-field evaluators run, and how `sup_t` is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub far: FarFieldSpec,
    /// Collocation times for `sup_t` (at least 16).
    pub times: usize,
    pub velocity: bool,
    pub periodic_velocity: bool,
    pub vorticity: bool,
    /// Samples with `|x| <= mask_radius` are rejected.
    pub mask_radius: f64,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self { far: FarFieldSpec::default(), times: 16, velocity: true, periodic_velocity: true, vorticity: true, mask_radius: 0.0 }
    }
}

/// One sample. Skipped columns hold NaN; a failed evaluation sets `flag`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub param: f64,
    pub r: f64,
    pub x: Vec3,
    pub s: f64,
    pub v: f64,
    pub grad_v: f64,
    pub w_sup: f64,
    pub grad_w_sup: f64,
    pub curl_v: f64,
    pub curl_w_sup: f64,
    pub budget_v: f64,
    pub budget_w: f64,
    pub budget_curl: f64,
    pub flag: Option<String>,
}

/// CSV header, in column order.
pub const SAMPLE_COLUMNS: [&str; 16] = [
    "param", "r", "x1", "x2", "x3", "s", "v", "grad_v", "w_sup", "grad_w_sup", "curl_v", "curl_w_sup", "budget_v",
    "budget_w", "budget_curl", "flag",
];

/// Quantity ids accepted by [`SampleRow::quantity`].
pub const QUANTITIES: [&str; 6] = ["v", "grad_v", "w_sup", "grad_w_sup", "curl_v", "curl_w_sup"];

impl SampleRow {
    fn blank(param: f64, x: Vec3) -> Self {
        let nan = f64::NAN;
        Self {
            param,
            r: crate::geom::norm(&x),
            x,
            s: wake(&x),
            v: nan,
            grad_v: nan,
            w_sup: nan,
            grad_w_sup: nan,
            curl_v: nan,
            curl_w_sup: nan,
            budget_v: nan,
            budget_w: nan,
            budget_curl: nan,
            flag: None,
        }
    }

    /// Value and error budget of a quantity id.
    pub fn quantity(&self, id: &str) -> Option<(f64, f64)> {
        Some(match id {
            "v" => (self.v, self.budget_v),
            "grad_v" => (self.grad_v, self.budget_v),
            "w_sup" => (self.w_sup, self.budget_w),
            "grad_w_sup" => (self.grad_w_sup, self.budget_w),
            "curl_v" => (self.curl_v, self.budget_curl),
            "curl_w_sup" => (self.curl_w_sup, self.budget_curl),
            _ => return None,
        })
    }

    /// Fit input for quantity `id`; `None` for unknown ids.
    pub fn decay_sample(&self, id: &str) -> Option<DecaySample> {
        let (value, budget) = self.quantity(id)?;
        Some(DecaySample { r: self.r, s: self.s, value, budget })
    }

    /// CSV fields in [`SAMPLE_COLUMNS`] order.
    pub fn csv_fields(&self) -> Vec<String> {
        let mut out: Vec<String> = [self.param, self.r, self.x[0], self.x[1], self.x[2], self.s, self.v, self.grad_v]
            .iter()
            .chain(&[self.w_sup, self.grad_w_sup, self.curl_v, self.curl_w_sup, self.budget_v, self.budget_w, self.budget_curl])
            .map(|v| format!("{v:e}"))
            .collect();
        out.push(self.flag.clone().unwrap_or_default());
        out
    }
}

fn fill_row(row: &mut SampleRow, sources: &FarFieldSources, spec: &SamplingSpec) -> Result<()> {
    let p = &sources.params;
    let x = row.x;
    if spec.velocity {
        let v = eval_velocity_farfield_steady(&x, sources, &spec.far)?;
        row.v = crate::geom::norm(&[v.steady[0], v.steady[1], v.steady[2]]);
        row.grad_v = v.steady[3..12].iter().map(|a| a * a).sum::<f64>().sqrt();
        row.budget_v = v.error_estimate + v.tail_estimate;
    }
    if spec.periodic_velocity {
        let far = FarFieldSpec { periodic_velocity: true, ..spec.far };
        let w = eval_velocity_farfield_periodic(&x, sources, &far)?;
        row.w_sup = w.periodic_sup(p, spec.times, 0..3);
        row.grad_w_sup = w.periodic_sup(p, spec.times, 3..12);
        // each mode enters twice (k and -k)
        row.budget_w = 2.0 * (w.error_estimate + w.tail_estimate);
    }
    if spec.vorticity {
        let c = eval_vorticity_farfield(&x, sources, &spec.far)?;
        row.curl_v = crate::geom::norm(&[c.steady[0], c.steady[1], c.steady[2]]);
        row.curl_w_sup = c.periodic_sup(p, spec.times, 0..3);
        row.budget_curl = c.error_estimate + c.tail_estimate;
    }
    Ok(())
}

/// Far-field magnitudes along a ray or wake sheet. Rows run in parallel; a failed row
/// keeps NaN magnitudes and carries the error message in `flag`.
pub fn sample_quantities(sources: &FarFieldSources, rays: &RaySpec, spec: &SamplingSpec) -> Result<Vec<SampleRow>> {
    rays.validate()?;
    if spec.times < 16 {
        return Err(invalid("times", "need at least 16 collocation times"));
    }
    let points = rays.points();
    for x in &points {
        let r = crate::geom::norm(x);
        if r <= spec.mask_radius {
            return Err(invalid("radii", format!("sample at |x| = {r} inside the mask radius")));
        }
        if let Some(f) = &sources.forcing {
            if crate::geom::norm(&crate::geom::sub(x, &f.center)) <= f.radius {
                return Err(invalid("radii", format!("sample at |x| = {r} inside the forcing support")));
            }
        }
    }
    Ok(points
        .into_par_iter()
        .map(|x| {
            let mut row = SampleRow::blank(rays.parameter(), x);
            if let Err(e) = fill_row(&mut row, sources, spec) {
                row.flag = Some(e.to_string());
            }
            row
        })
        .collect())
}
