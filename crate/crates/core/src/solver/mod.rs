//! Spectral solves of the time-periodic Oseen and Navier-Stokes problems on a periodic
//! box, field dumps, and far-field evaluation through the representation formulas.
//!
//! Fields are stored per temporal mode `k = -K..K` as complex 3-vectors on the nodes
//! `-L + i h`, `h = 2L/N`, x1 fastest. The real field is `u(t, x) = sum_k e^{i eta_k t} u_k(x)`.

mod dump;
mod farfield;
mod fft;
mod residual;
mod spectral;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geom::{norm, smoothstep5, sub, CVec3, Vec3};
use crate::special::FlowParams;

pub use dump::{read_dump, write_dump, DUMP_MAGIC};
pub use farfield::{
    compute_fs, compute_hs, eval_velocity_farfield_periodic, eval_velocity_farfield_steady, eval_vorticity_farfield,
    FarFieldSources, FarFieldSpec, FarValue, SplitParts,
};
pub use residual::{fixedpoint_residual, residual_points, ResidualPoint, ResidualReport, ResidualSpec};
pub use spectral::{
    leray_project, nonlinear_modes, picard_solve, solve_linear, solve_mode, spectral_divergence, wraparound_estimate, PicardOutcome,
    PicardSpec, SpectralField,
};

const CZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Uniform periodic grid with `n` nodes per axis on `[-L, L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub half_length: f64,
}

impl Grid {
    pub fn new(n: usize, half_length: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(invalid("n", "grid size must be even and at least 4"));
        }
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(invalid("half_length", "must be positive"));
        }
        Ok(Self { n, half_length })
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.n as f64
    }

    pub fn index(&self, i1: usize, i2: usize, i3: usize) -> usize {
        i1 + self.n * (i2 + self.n * i3)
    }

    pub fn node(&self, idx: usize) -> Vec3 {
        let n = self.n;
        let h = self.spacing();
        let l = self.half_length;
        [-l + (idx % n) as f64 * h, -l + ((idx / n) % n) as f64 * h, -l + (idx / (n * n)) as f64 * h]
    }

    /// Signed wavenumber index of FFT bin `m`; `None` for the Nyquist bin.
    pub(crate) fn signed(&self, m: usize) -> Option<i64> {
        let n = self.n as i64;
        let m = m as i64;
        if 2 * m == n {
            None
        } else if 2 * m < n {
            Some(m)
        } else {
            Some(m - n)
        }
    }

    /// Wave vector of the FFT bin with linear index `idx`; `None` if any axis is Nyquist.
    pub(crate) fn wave(&self, idx: usize) -> Option<Vec3> {
        let n = self.n;
        let d = std::f64::consts::PI / self.half_length;
        let a = self.signed(idx % n)?;
        let b = self.signed((idx / n) % n)?;
        let c = self.signed(idx / (n * n))?;
        Some([a as f64 * d, b as f64 * d, c as f64 * d])
    }
}

/// Radial bump profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpProfile {
    /// `(1 - |x/rho|^2)^4` on `|x| < rho`.
    #[default]
    Quartic,
}

/// One temporal mode of the forcing: `amplitude * bump * direction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingMode {
    pub k: i64,
    pub re: f64,
    pub im: f64,
    pub direction: Vec3,
}

impl ForcingMode {
    pub fn amplitude(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Compactly supported forcing `f(t, x) = sum_k c_k e^{i eta_k t} b(|x - x0|/rho) d_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingSpec {
    pub center: Vec3,
    pub radius: f64,
    #[serde(default)]
    pub profile: BumpProfile,
    pub modes: Vec<ForcingMode>,
}

impl ForcingSpec {
    /// Bump at the origin with `c_0 = a`, `c_{+-1} = a/2`, direction `e1`.
    pub fn standard(amplitude: f64, radius: f64) -> Self {
        let e1 = [1.0, 0.0, 0.0];
        let m = |k, re| ForcingMode { k, re, im: 0.0, direction: e1 };
        Self {
            center: [0.0; 3],
            radius,
            profile: BumpProfile::Quartic,
            modes: vec![m(-1, 0.5 * amplitude), m(0, amplitude), m(1, 0.5 * amplitude)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(invalid("radius", "support radius must be positive"));
        }
        for (i, m) in self.modes.iter().enumerate() {
            if self.modes[..i].iter().any(|o| o.k == m.k) {
                return Err(invalid("modes", format!("mode {} listed twice", m.k)));
            }
            let c = m.amplitude();
            let partner = self.modes.iter().find(|o| o.k == -m.k);
            let ok = match partner {
                Some(p) => (p.amplitude() - c.conj()).norm() <= 1e-14 * c.norm().max(1.0) && p.direction == m.direction,
                None => c.norm() == 0.0,
            };
            if !ok {
                return Err(invalid("modes", format!("mode {} needs c_-k = conj(c_k) with the same direction", m.k)));
            }
            if m.k == 0 && c.im != 0.0 {
                return Err(invalid("modes", "mode 0 amplitude must be real"));
            }
        }
        Ok(())
    }

    /// Largest `|c_k|`.
    pub fn amplitude(&self) -> f64 {
        self.modes.iter().fold(0.0, |m, c| m.max(c.amplitude().norm()))
    }

    pub fn max_mode(&self) -> usize {
        self.modes.iter().map(|m| m.k.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn bump(&self, y: &Vec3) -> f64 {
        let q = norm(&sub(y, &self.center)) / self.radius;
        match self.profile {
            BumpProfile::Quartic => {
                if q < 1.0 {
                    (1.0 - q * q).powi(4)
                } else {
                    0.0
                }
            }
        }
    }

    /// Mode `k` of the forcing at `y`.
    pub fn mode_value(&self, k: i64, y: &Vec3) -> CVec3 {
        match self.modes.iter().find(|m| m.k == k) {
            Some(m) => {
                let s = m.amplitude() * self.bump(y);
                [s * m.direction[0], s * m.direction[1], s * m.direction[2]]
            }
            None => [CZERO; 3],
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for m in &mut out.modes {
            m.re *= factor;
            m.im *= factor;
        }
        out
    }
}

/// Time-periodic vector field on a grid, modes `-K..K` in node space.
#[derive(Debug, Clone, PartialEq)]
pub struct TimePeriodicField {
    pub k_max: usize,
    pub grid: Grid,
    pub params: FlowParams,
    /// `modes[k + K][idx]`.
    pub modes: Vec<Vec<CVec3>>,
}

impl TimePeriodicField {
    pub fn zeros(k_max: usize, grid: Grid, params: FlowParams) -> Self {
        Self { k_max, grid, params, modes: vec![vec![[CZERO; 3]; grid.len()]; 2 * k_max + 1] }
    }

    pub fn mode(&self, k: i64) -> &[CVec3] {
        &self.modes[(k + self.k_max as i64) as usize]
    }

    pub fn mode_mut(&mut self, k: i64) -> &mut Vec<CVec3> {
        let i = (k + self.k_max as i64) as usize;
        &mut self.modes[i]
    }

    /// Time-domain value `sum_k e^{i eta_k t} u_k` at node `idx`.
    pub fn synthesize(&self, t: f64, idx: usize) -> CVec3 {
        let mut out = [CZERO; 3];
        for k in -(self.k_max as i64)..=self.k_max as i64 {
            let ph = Complex64::from_polar(1.0, self.params.mode_frequency(k) * t);
            let v = self.mode(k)[idx];
            for c in 0..3 {
                out[c] += ph * v[c];
            }
        }
        out
    }

    /// `sqrt(sum_k sum_nodes |u_k|^2)`.
    pub fn l2(&self) -> f64 {
        self.modes.iter().flatten().map(|v| v.iter().map(|c| c.norm_sqr()).sum::<f64>()).sum::<f64>().sqrt()
    }

    /// Largest deviation from `u_{-k} = conj(u_k)`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut d = 0.0f64;
        for k in 0..=self.k_max as i64 {
            for (a, b) in self.mode(k).iter().zip(self.mode(-k)) {
                for c in 0..3 {
                    d = d.max((a[c] - b[c].conj()).norm());
                }
            }
        }
        d
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        let mut out = self.clone();
        for (mo, mb) in out.modes.iter_mut().zip(&other.modes) {
            for (a, b) in mo.iter_mut().zip(mb) {
                for c in 0..3 {
                    a[c] = f(a[c], b[c]);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.modes.iter_mut().flatten().for_each(|v| v.iter_mut().for_each(|c| *c *= s));
        out
    }
}

/// Steady part `P u` (mode 0, returned as a field with only mode 0) and purely periodic
/// part `P_perp u`; the two sum to `u` exactly.
pub fn project_parts(field: &TimePeriodicField) -> (TimePeriodicField, TimePeriodicField) {
    let mut steady = TimePeriodicField::zeros(field.k_max, field.grid, field.params);
    let mut perp = field.clone();
    *steady.mode_mut(0) = field.mode(0).to_vec();
    perp.mode_mut(0).iter_mut().for_each(|v| *v = [CZERO; 3]);
    (steady, perp)
}

/// Cutoff `chi_S(x) = chi(|x|/S)`: 1 on `|x| <= 5S/4`, 0 on `|x| >= 7S/4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub s: f64,
    pub s0: f64,
}

impl CutoffSpec {
    pub fn new(s: f64, s0: f64) -> Result<Self> {
        if !(s0 > 0.0) {
            return Err(invalid("s0", "must be positive"));
        }
        if !(s >= 2.0 * s0) {
            return Err(invalid("s", "must be at least 2 S0"));
        }
        Ok(Self { s, s0 })
    }

    pub fn chi(&self, y: &Vec3) -> f64 {
        let q = norm(y) / self.s;
        1.0 - smoothstep5(2.0 * (q - 1.25)).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_plateaus() {
        let c = CutoffSpec::new(2.0, 1.0).unwrap();
        assert_eq!(c.chi(&[2.5, 0.0, 0.0]), 1.0);
        assert_eq!(c.chi(&[0.0, 3.5, 0.0]), 0.0);
        let mid = c.chi(&[3.0, 0.0, 0.0]);
        assert!(mid > 0.0 && mid < 1.0);
        assert!(CutoffSpec::new(1.5, 1.0).is_err());
    }

    #[test]
    fn forcing_reality_enforced() {
        let f = ForcingSpec::standard(0.05, 1.0);
        f.validate().unwrap();
        let mut bad = f.clone();
        bad.modes[0].im = 0.01;
        assert!(bad.validate().is_err());
        assert_eq!(f.bump(&[0.0; 3]), 1.0);
        assert_eq!(f.bump(&[1.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn projections_split_exactly() {
        let g = Grid::new(4, 1.0).unwrap();
        let p = FlowParams::new(1.0, 2.0 * std::f64::consts::PI).unwrap();
        let mut u = TimePeriodicField::zeros(1, g, p);
        for (m, mode) in u.modes.iter_mut().enumerate() {
            for (i, v) in mode.iter_mut().enumerate() {
                *v = [Complex64::new(m as f64 + 0.1 * i as f64, 0.3), CZERO, Complex64::new(0.0, i as f64)];
            }
        }
        let (a, b) = project_parts(&u);
        assert_eq!(a.add(&b), u);
        let (aa, ab) = project_parts(&a);
        assert_eq!(aa, a);
        assert_eq!(ab.l2(), 0.0);
        let (ba, bb) = project_parts(&b);
        assert_eq!(bb, b);
        assert_eq!(ba.l2(), 0.0);
    }
}
