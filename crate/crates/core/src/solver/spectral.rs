//! Mode solves, the pseudo-spectral nonlinearity and the Picard iteration.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fft::Fft3;
use super::{ForcingSpec, Grid, TimePeriodicField, CZERO};
use crate::error::{invalid, Error, Result};
use crate::geom::{norm, CMat3, CVec3, Vec3};
use crate::special::FlowParams;

type Comp = [Vec<Complex64>; 3];

/// Field held as unnormalised FFT coefficients per mode and component.
#[derive(Debug, Clone)]
pub struct SpectralField {
    pub k_max: usize,
    pub grid: Grid,
    pub params: FlowParams,
    modes: Vec<Comp>,
}

fn forward(fft: &Fft3, mode: &[CVec3]) -> Comp {
    let mut out: Comp = Default::default();
    out.par_iter_mut().enumerate().for_each(|(c, o)| {
        *o = mode.iter().map(|v| v[c]).collect();
        fft.process(o, false);
    });
    out
}

fn inverse(fft: &Fft3, hat: &Comp) -> Vec<CVec3> {
    let len = hat[0].len();
    let scale = 1.0 / len as f64;
    let comps: Vec<Vec<Complex64>> = hat
        .par_iter()
        .map(|h| {
            let mut d = h.clone();
            fft.process(&mut d, true);
            d
        })
        .collect();
    (0..len).map(|i| [comps[0][i] * scale, comps[1][i] * scale, comps[2][i] * scale]).collect()
}

impl SpectralField {
    pub fn from_field(field: &TimePeriodicField) -> Self {
        let fft = Fft3::new(field.grid.n);
        let modes = field.modes.iter().map(|m| forward(&fft, m)).collect();
        Self { k_max: field.k_max, grid: field.grid, params: field.params, modes }
    }

    pub fn to_field(&self) -> TimePeriodicField {
        let fft = Fft3::new(self.grid.n);
        let modes = self.modes.iter().map(|m| inverse(&fft, m)).collect();
        TimePeriodicField { k_max: self.k_max, grid: self.grid, params: self.params, modes }
    }

    fn mode(&self, k: i64) -> &Comp {
        &self.modes[(k + self.k_max as i64) as usize]
    }

    /// Trigonometric interpolant of mode `k` and its gradient `[i][j] = d_j u_i` at `x`.
    pub fn eval(&self, k: i64, x: &Vec3) -> (CVec3, CMat3) {
        let g = self.grid;
        let n = g.n;
        let d = std::f64::consts::PI / g.half_length;
        let phase: Vec<Vec<(Complex64, f64)>> = (0..3)
            .map(|a| {
                (0..n)
                    .map(|m| match g.signed(m) {
                        Some(s) => {
                            let xi = s as f64 * d;
                            (Complex64::from_polar(1.0, xi * (x[a] + g.half_length)), xi)
                        }
                        None => (CZERO, 0.0),
                    })
                    .collect()
            })
            .collect();
        let hat = self.mode(k);
        let planes: Vec<(CVec3, CMat3)> = (0..n)
            .into_par_iter()
            .map(|i3| {
                let mut v = [CZERO; 3];
                let mut dv = [[CZERO; 3]; 3];
                let (e3, x3) = phase[2][i3];
                for i2 in 0..n {
                    let (e2, x2) = phase[1][i2];
                    let e23 = e2 * e3;
                    for i1 in 0..n {
                        let (e1, x1) = phase[0][i1];
                        let e = e1 * e23;
                        let idx = i1 + n * (i2 + n * i3);
                        let xi = [x1, x2, x3];
                        for c in 0..3 {
                            let t = hat[c][idx] * e;
                            v[c] += t;
                            for j in 0..3 {
                                dv[c][j] += t * xi[j];
                            }
                        }
                    }
                }
                (v, dv)
            })
            .collect();
        let s = 1.0 / g.len() as f64;
        let mut v = [CZERO; 3];
        let mut dv = [[CZERO; 3]; 3];
        for (pv, pd) in planes {
            for c in 0..3 {
                v[c] += pv[c] * s;
                for j in 0..3 {
                    dv[c][j] += pd[c][j] * Complex64::new(0.0, s);
                }
            }
        }
        (v, dv)
    }
}

fn symbol_solve(k: i64, hat: &mut Comp, params: &FlowParams, grid: &Grid) {
    let eta = params.mode_frequency(k);
    let lam = params.lambda;
    let [h0, h1, h2] = hat;
    h0.par_iter_mut().zip(h1.par_iter_mut()).zip(h2.par_iter_mut()).enumerate().for_each(|(idx, ((a, b), c))| {
        let f = [*a, *b, *c];
        let out = match grid.wave(idx) {
            None => [CZERO; 3],
            Some(xi) => {
                let q = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
                if q == 0.0 {
                    if k == 0 {
                        [CZERO; 3]
                    } else {
                        let s = Complex64::new(0.0, eta).inv();
                        [f[0] * s, f[1] * s, f[2] * s]
                    }
                } else {
                    let dot = f[0] * xi[0] + f[1] * xi[1] + f[2] * xi[2];
                    let den = Complex64::new(q, eta - lam * xi[0]).inv();
                    [(f[0] - dot * (xi[0] / q)) * den, (f[1] - dot * (xi[1] / q)) * den, (f[2] - dot * (xi[2] / q)) * den]
                }
            }
        };
        *a = out[0];
        *b = out[1];
        *c = out[2];
    });
}

/// Solve `(i eta_k - Delta - lambda d1) u + grad p = f`, `div u = 0` for one mode with
/// the symbol `(I - xi xi^T/|xi|^2)/(|xi|^2 - i lambda xi1 + i eta_k)`. The mean is
/// zero for `k = 0` and `f_hat(0)/(i eta_k)` otherwise; Nyquist bins are zeroed.
pub fn solve_mode(k: i64, forcing_mode: &[CVec3], params: &FlowParams, grid: &Grid) -> Result<Vec<CVec3>> {
    if forcing_mode.len() != grid.len() {
        return Err(invalid("forcing_mode", "length must be n^3"));
    }
    let fft = Fft3::new(grid.n);
    let mut hat = forward(&fft, forcing_mode);
    symbol_solve(k, &mut hat, params, grid);
    Ok(inverse(&fft, &hat))
}

/// `max |xi . u_hat| / max |xi| |u_hat|` over the lattice.
pub fn spectral_divergence(mode: &[CVec3], grid: &Grid) -> f64 {
    let fft = Fft3::new(grid.n);
    let hat = forward(&fft, mode);
    let mut div = 0.0f64;
    let mut scale = 0.0f64;
    for idx in 0..grid.len() {
        if let Some(xi) = grid.wave(idx) {
            let d = hat[0][idx] * xi[0] + hat[1][idx] * xi[1] + hat[2][idx] * xi[2];
            div = div.max(d.norm());
            let a = (hat[0][idx].norm_sqr() + hat[1][idx].norm_sqr() + hat[2][idx].norm_sqr()).sqrt();
            scale = scale.max(a * norm(&xi));
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        div / scale
    }
}

fn check_forcing(f: &ForcingSpec, grid: &Grid, k_max: usize) -> Result<()> {
    f.validate()?;
    if f.max_mode() > k_max {
        return Err(invalid("k_max", format!("forcing has mode {} beyond K_max = {k_max}", f.max_mode())));
    }
    let l = grid.half_length;
    let reach = f.center.iter().fold(0.0f64, |m, c| m.max(c.abs())) + f.radius;
    let have = l - reach;
    if have < 0.5 * l {
        return Err(Error::Margin { needed: 0.5 * l, have });
    }
    Ok(())
}

fn forcing_hat(f: &ForcingSpec, grid: &Grid, k_max: usize, fft: &Fft3) -> Vec<Comp> {
    (-(k_max as i64)..=k_max as i64)
        .map(|k| {
            let m: Vec<CVec3> = (0..grid.len()).into_par_iter().map(|i| f.mode_value(k, &grid.node(i))).collect();
            forward(fft, &m)
        })
        .collect()
}

fn solve_all(rhs: &[Comp], k_max: usize, params: &FlowParams, grid: &Grid) -> Vec<Comp> {
    rhs.par_iter()
        .enumerate()
        .map(|(i, r)| {
            let mut h = r.clone();
            symbol_solve(i as i64 - k_max as i64, &mut h, params, grid);
            h
        })
        .collect()
}

/// Linear solve `u = Gamma^lambda * f` on the box, mode by mode.
pub fn solve_linear(f: &ForcingSpec, params: &FlowParams, grid: &Grid, k_max: usize) -> Result<TimePeriodicField> {
    check_forcing(f, grid, k_max)?;
    let fft = Fft3::new(grid.n);
    let rhs = forcing_hat(f, grid, k_max, &fft);
    let modes = solve_all(&rhs, k_max, params, grid);
    Ok(SpectralField { k_max, grid: *grid, params: *params, modes }.to_field())
}

/// Wrap-around contamination: the linear solve on the box `L` against the box `2L`
/// (same spacing), `max |u_L - u_2L| / max |u_2L|` over nodes with `|x| <= L/3`.
pub fn wraparound_estimate(f: &ForcingSpec, params: &FlowParams, grid: &Grid, k_max: usize) -> Result<f64> {
    let small = solve_linear(f, params, grid, k_max)?;
    let big_grid = Grid::new(2 * grid.n, 2.0 * grid.half_length)?;
    let big = solve_linear(f, params, &big_grid, k_max)?;
    let off = grid.n / 2;
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for idx in 0..grid.len() {
        let x = grid.node(idx);
        if norm(&x) > grid.half_length / 3.0 {
            continue;
        }
        let n = grid.n;
        let (i1, i2, i3) = (idx % n, (idx / n) % n, idx / (n * n));
        let j = big_grid.index(i1 + off, i2 + off, i3 + off);
        for (ms, mb) in small.modes.iter().zip(&big.modes) {
            for c in 0..3 {
                diff = diff.max((ms[idx][c] - mb[j][c]).norm());
                scale = scale.max(mb[j][c].norm());
            }
        }
    }
    Ok(if scale == 0.0 { 0.0 } else { diff / scale })
}

/// Dealiased evaluation of `A(u) = -curl u x u` per temporal mode.
struct Nonlinear {
    grid: Grid,
    params: FlowParams,
    k_max: usize,
    times: usize,
    np: usize,
    fft: Fft3,
    pad: Vec<Option<usize>>,
    unpad: Vec<Option<usize>>,
}

impl Nonlinear {
    fn new(grid: Grid, params: FlowParams, k_max: usize, times: usize) -> Self {
        let n = grid.n;
        let np = (3 * n).div_ceil(2).next_multiple_of(2);
        let map = |m: usize| grid.signed(m).map(|s| s.rem_euclid(np as i64) as usize);
        let axis: Vec<Option<usize>> = (0..n).map(map).collect();
        let pad: Vec<Option<usize>> = (0..grid.len())
            .map(|idx| {
                let a = axis[idx % n]?;
                let b = axis[(idx / n) % n]?;
                let c = axis[idx / (n * n)]?;
                Some(a + np * (b + np * c))
            })
            .collect();
        let mut unpad = vec![None; np * np * np];
        for (idx, p) in pad.iter().enumerate() {
            if let Some(p) = p {
                unpad[*p] = Some(idx);
            }
        }
        Self { grid, params, k_max, times, np, fft: Fft3::new(np), pad, unpad }
    }

    fn apply(&self, u: &[Comp]) -> Vec<Comp> {
        let n3 = self.grid.len();
        let np3 = self.np * self.np * self.np;
        let km = self.k_max as i64;
        let period = self.params.period;
        let mut out: Vec<Comp> = (0..u.len()).map(|_| [vec![CZERO; n3], vec![CZERO; n3], vec![CZERO; n3]]).collect();
        let norm_in = 1.0 / n3 as f64;
        let norm_out = n3 as f64 / np3 as f64;
        for j in 0..self.times {
            let t = period * j as f64 / self.times as f64;
            let ph: Vec<Complex64> =
                (-km..=km).map(|k| Complex64::from_polar(1.0, self.params.mode_frequency(k) * t)).collect();
            // packed u_c + i curl_c on the padded lattice
            let mut packed: Vec<Vec<Complex64>> = vec![vec![CZERO; np3]; 3];
            for idx in 0..n3 {
                let Some(p) = self.pad[idx] else { continue };
                let Some(xi) = self.grid.wave(idx) else { continue };
                let mut v = [CZERO; 3];
                for (m, w) in u.iter().zip(&ph) {
                    for c in 0..3 {
                        v[c] += m[c][idx] * w;
                    }
                }
                let i = Complex64::i();
                let curl = [
                    i * (xi[1] * v[2] - xi[2] * v[1]),
                    i * (xi[2] * v[0] - xi[0] * v[2]),
                    i * (xi[0] * v[1] - xi[1] * v[0]),
                ];
                for c in 0..3 {
                    packed[c][p] = v[c] + i * curl[c];
                }
            }
            packed.par_iter_mut().for_each(|d| self.fft.process(d, true));
            // physical product a = -curl u x u, packed as (a1 + i a2, a3)
            let mut pa = vec![CZERO; np3];
            let mut pb = vec![CZERO; np3];
            pa.par_iter_mut().zip(pb.par_iter_mut()).enumerate().for_each(|(q, (x, y))| {
                let uu = [packed[0][q].re * norm_in, packed[1][q].re * norm_in, packed[2][q].re * norm_in];
                let w = [packed[0][q].im * norm_in, packed[1][q].im * norm_in, packed[2][q].im * norm_in];
                let a = [
                    -(w[1] * uu[2] - w[2] * uu[1]),
                    -(w[2] * uu[0] - w[0] * uu[2]),
                    -(w[0] * uu[1] - w[1] * uu[0]),
                ];
                *x = Complex64::new(a[0], a[1]);
                *y = Complex64::new(a[2], 0.0);
            });
            rayon::join(|| self.fft.process(&mut pa, false), || self.fft.process(&mut pb, false));
            let np = self.np;
            let neg = |p: usize| {
                let (a, b, c) = (p % np, (p / np) % np, p / (np * np));
                ((np - a) % np) + np * (((np - b) % np) + np * ((np - c) % np))
            };
            for (p, slot) in self.unpad.iter().enumerate() {
                let Some(idx) = slot else { continue };
                let zq = pa[p];
                let zm = pa[neg(p)].conj();
                let a1 = (zq + zm) * 0.5;
                let a2 = (zq - zm) * Complex64::new(0.0, -0.5);
                let a = [a1 * norm_out, a2 * norm_out, pb[p] * norm_out];
                for (m, w) in out.iter_mut().zip(&ph) {
                    let w = w.conj() / self.times as f64;
                    for c in 0..3 {
                        m[c][*idx] += a[c] * w;
                    }
                }
            }
        }
        out
    }
}

fn collocation_count(k_max: usize, requested: Option<usize>) -> Result<usize> {
    let min = 4 * k_max + 1;
    match requested {
        None => Ok(min),
        Some(m) if m >= min => Ok(m),
        Some(m) => Err(invalid("collocation_times", format!("{m} < 4 K_max + 1 = {min}"))),
    }
}

/// `A(u) = -curl u x u` per temporal mode, dealiased by 3/2 padding in space and
/// `4 K + 1` collocation times.
pub fn nonlinear_modes(u: &TimePeriodicField) -> TimePeriodicField {
    let s = SpectralField::from_field(u);
    let nl = Nonlinear::new(u.grid, u.params, u.k_max, 4 * u.k_max + 1);
    let modes = nl.apply(&s.modes);
    SpectralField { k_max: u.k_max, grid: u.grid, params: u.params, modes }.to_field()
}

/// Leray projection `I - xi xi^T/|xi|^2` of every mode (means kept).
pub fn leray_project(field: &TimePeriodicField) -> TimePeriodicField {
    let mut s = SpectralField::from_field(field);
    let g = field.grid;
    for m in &mut s.modes {
        for idx in 0..g.len() {
            let Some(xi) = g.wave(idx) else {
                for c in m.iter_mut() {
                    c[idx] = CZERO;
                }
                continue;
            };
            let q = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
            if q == 0.0 {
                continue;
            }
            let dot = (m[0][idx] * xi[0] + m[1][idx] * xi[1] + m[2][idx] * xi[2]) / q;
            for c in 0..3 {
                m[c][idx] -= dot * xi[c];
            }
        }
    }
    s.to_field()
}

/// Picard controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardSpec {
    pub tol: f64,
    pub max_iter: usize,
    pub amplitude_guard: f64,
    /// Collocation times per period; at least `4 K + 1`.
    #[serde(default)]
    pub collocation_times: Option<usize>,
}

impl Default for PicardSpec {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 30, amplitude_guard: 0.1, collocation_times: None }
    }
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub field: TimePeriodicField,
    /// First iterate, the linear solution.
    pub linear: TimePeriodicField,
    /// `A(u)` of the returned field.
    pub nonlinear: TimePeriodicField,
    /// Relative mode-norm change per iteration.
    pub history: Vec<f64>,
    pub collocation_times: usize,
}

fn l2(modes: &[Comp]) -> f64 {
    modes.iter().flat_map(|m| m.iter().flatten()).map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn diff_l2(a: &[Comp], b: &[Comp]) -> f64 {
    let mut s = 0.0;
    for (ma, mb) in a.iter().zip(b) {
        for c in 0..3 {
            for (x, y) in ma[c].iter().zip(&mb[c]) {
                s += (x - y).norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Fixed-point iteration `u <- Gamma^lambda * (f + A(u))` starting from the linear solution.
pub fn picard_solve(
    f: &ForcingSpec,
    params: &FlowParams,
    grid: &Grid,
    k_max: usize,
    spec: &PicardSpec,
) -> Result<PicardOutcome> {
    check_forcing(f, grid, k_max)?;
    if !(spec.tol > 0.0) || spec.max_iter == 0 {
        return Err(invalid("picard", "tol must be positive and max_iter at least 1"));
    }
    let amp = f.amplitude();
    if amp > spec.amplitude_guard {
        return Err(Error::AmplitudeGuard { amplitude: amp, guard: spec.amplitude_guard });
    }
    let times = collocation_count(k_max, spec.collocation_times)?;
    let fft = Fft3::new(grid.n);
    let rhs = forcing_hat(f, grid, k_max, &fft);
    let linear = solve_all(&rhs, k_max, params, grid);
    let nl = Nonlinear::new(*grid, *params, k_max, times);
    let mut u = linear.clone();
    let mut history = Vec::new();
    let mut rising = 0;
    let mut converged = false;
    for _ in 0..spec.max_iter {
        let a = nl.apply(&u);
        let total: Vec<Comp> = rhs
            .iter()
            .zip(&a)
            .map(|(r, s)| {
                let mut o = r.clone();
                for c in 0..3 {
                    o[c].iter_mut().zip(&s[c]).for_each(|(x, y)| *x += y);
                }
                o
            })
            .collect();
        let next = solve_all(&total, k_max, params, grid);
        let d = diff_l2(&next, &u);
        let s = l2(&next);
        let change = if d == 0.0 { 0.0 } else { d / s };
        if !change.is_finite() {
            history.push(change);
            return Err(Error::Diverged { iterations: history.len(), last: change, history });
        }
        if history.last().is_some_and(|&p| change > p) {
            rising += 1;
        } else {
            rising = 0;
        }
        history.push(change);
        u = next;
        if rising >= 3 {
            return Err(Error::Diverged { iterations: history.len(), last: change, history });
        }
        if change < spec.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged {
            iterations: history.len(),
            tol: spec.tol,
            last: *history.last().unwrap_or(&f64::NAN),
            history,
        });
    }
    let a = nl.apply(&u);
    let wrap = |modes| SpectralField { k_max, grid: *grid, params: *params, modes }.to_field();
    Ok(PicardOutcome { field: wrap(u), linear: wrap(linear), nonlinear: wrap(a), history, collocation_times: times })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params() -> FlowParams {
        FlowParams::new(1.0, 2.0 * PI).unwrap()
    }

    fn divergence_free_field(grid: &Grid) -> Vec<CVec3> {
        // curl of a smooth periodic vector potential
        let d = PI / grid.half_length;
        (0..grid.len())
            .map(|i| {
                let x = grid.node(i);
                let (a, b, c) = ((d * x[0]).sin(), (2.0 * d * x[1]).cos(), (d * x[2]).sin());
                let (da, db, dc) = (d * (d * x[0]).cos(), -2.0 * d * (2.0 * d * x[1]).sin(), d * (d * x[2]).cos());
                // psi = (b c, a c, a b)
                let curl = [a * db - a * dc, b * dc - b * da, c * da - c * db];
                let c = Complex64::new(1.0, 0.3);
                [c * curl[0], c * curl[1], c * curl[2]]
            })
            .collect()
    }

    fn forward_symbol(k: i64, u: &[CVec3], p: &FlowParams, g: &Grid) -> Vec<CVec3> {
        let fft = Fft3::new(g.n);
        let mut h = forward(&fft, u);
        let eta = p.mode_frequency(k);
        for idx in 0..g.len() {
            let xi = g.wave(idx).unwrap_or([0.0; 3]);
            let q = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
            let s = Complex64::new(q, eta - p.lambda * xi[0]);
            for c in 0..3 {
                h[c][idx] *= s;
            }
        }
        inverse(&fft, &h)
    }

    #[test]
    fn zero_forcing_gives_zero() {
        let g = Grid::new(8, 4.0).unwrap();
        let z = vec![[CZERO; 3]; g.len()];
        let u = solve_mode(1, &z, &params(), &g).unwrap();
        assert!(u.iter().all(|v| v.iter().all(|c| c.norm() == 0.0)));
    }

    #[test]
    fn manufactured_round_trip() {
        let g = Grid::new(16, 3.0).unwrap();
        let p = params();
        let u = divergence_free_field(&g);
        for k in [0, 1, -2] {
            let f = forward_symbol(k, &u, &p, &g);
            let back = solve_mode(k, &f, &p, &g).unwrap();
            let scale = u.iter().flat_map(|v| v.iter()).fold(0.0f64, |m, c| m.max(c.norm()));
            let err = u.iter().zip(&back).flat_map(|(a, b)| (0..3).map(move |c| (a[c] - b[c]).norm())).fold(0.0, f64::max);
            assert!(err <= 1e-12 * scale, "k={k}: {err}");
        }
    }

    #[test]
    fn bump_solve_is_divergence_free_and_steady_forcing_stays_steady() {
        let g = Grid::new(16, 4.0).unwrap();
        let p = params();
        let f = ForcingSpec::standard(0.05, 1.0);
        let u = solve_linear(&f, &p, &g, 2).unwrap();
        for k in -2..=2 {
            assert!(spectral_divergence(u.mode(k), &g) <= 1e-12);
        }
        assert!(u.hermitian_defect() <= 1e-14 * u.l2());
        let mut steady = f.clone();
        steady.modes.retain(|m| m.k == 0);
        let v = solve_linear(&steady, &p, &g, 2).unwrap();
        for k in [-2i64, -1, 1, 2] {
            assert!(v.mode(k).iter().all(|w| w.iter().all(|c| c.norm() == 0.0)));
        }
    }

    #[test]
    fn linear_in_forcing() {
        let g = Grid::new(12, 4.0).unwrap();
        let p = params();
        let f = ForcingSpec::standard(0.05, 1.0);
        let a = solve_linear(&f, &p, &g, 1).unwrap();
        let b = solve_linear(&f.scaled(-2.5), &p, &g, 1).unwrap();
        let d = a.scale(-2.5).sub(&b).l2();
        assert!(d <= 1e-12 * b.l2());
    }

    #[test]
    fn margin_and_guard_rejected() {
        let g = Grid::new(8, 2.0).unwrap();
        let p = params();
        let f = ForcingSpec::standard(0.05, 1.5);
        assert!(matches!(solve_linear(&f, &p, &g, 1), Err(Error::Margin { .. })));
        let g = Grid::new(8, 4.0).unwrap();
        let big = ForcingSpec::standard(5.0, 1.0);
        assert!(matches!(picard_solve(&big, &p, &g, 1, &PicardSpec::default()), Err(Error::AmplitudeGuard { .. })));
    }

    #[test]
    fn zero_forcing_converges_in_one_iteration() {
        let g = Grid::new(8, 4.0).unwrap();
        let f = ForcingSpec::standard(0.0, 1.0);
        let out = picard_solve(&f, &params(), &g, 1, &PicardSpec::default()).unwrap();
        assert_eq!(out.history, vec![0.0]);
        assert_eq!(out.field.l2(), 0.0);
    }

    #[test]
    fn nonlinearity_matches_pointwise_product() {
        // band-limited field: the dealiased product is exact on the nodes
        let g = Grid::new(12, PI).unwrap();
        let p = params();
        let mut u = TimePeriodicField::zeros(1, g, p);
        for idx in 0..g.len() {
            let x = g.node(idx);
            let s = [x[1].sin(), x[2].cos(), x[0].sin()];
            u.mode_mut(0)[idx] = [Complex64::new(s[0], 0.0), Complex64::new(s[1], 0.0), Complex64::new(s[2], 0.0)];
            let w = Complex64::new(0.5, 0.25) * x[2].sin();
            u.mode_mut(1)[idx] = [CZERO, w, CZERO];
            u.mode_mut(-1)[idx] = [CZERO, w.conj(), CZERO];
        }
        let a = nonlinear_modes(&u);
        let spec = SpectralField::from_field(&u);
        for idx in [0, 17, 300, 1000] {
            let x = g.node(idx);
            for k in -1i64..=1 {
                // mode k of -curl u x u from the mode products
                let mut want = [CZERO; 3];
                for k1 in -1i64..=1 {
                    let k2 = k - k1;
                    if k2.abs() > 1 {
                        continue;
                    }
                    let (_, d1) = spec.eval(k1, &x);
                    let (v2, _) = spec.eval(k2, &x);
                    let w = [d1[2][1] - d1[1][2], d1[0][2] - d1[2][0], d1[1][0] - d1[0][1]];
                    let c = crate::geom::ccross(&w, &v2);
                    for i in 0..3 {
                        want[i] -= c[i];
                    }
                }
                for i in 0..3 {
                    assert!((a.mode(k)[idx][i] - want[i]).norm() < 1e-12, "k={k} idx={idx}");
                }
            }
        }
    }

    #[test]
    fn point_evaluation_reproduces_nodes() {
        let g = Grid::new(8, 2.0).unwrap();
        let p = params();
        let f = ForcingSpec::standard(0.05, 0.9);
        let u = solve_linear(&f, &p, &g, 1).unwrap();
        let s = SpectralField::from_field(&u);
        for idx in [0, 5, 77, 300] {
            let (v, _) = s.eval(1, &g.node(idx));
            for c in 0..3 {
                assert!((v[c] - u.mode(1)[idx][c]).norm() < 1e-14);
            }
        }
    }
}
