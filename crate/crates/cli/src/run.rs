//! Subcommand implementations. Every command writes its artifacts into the output
//! directory; file names are fixed so reruns overwrite byte-identically.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use tpwake_core::harness::{
    fit_decay, kernel_surrogate_decay, sample_quantities, weighted_norms, DecayFitReport, KernelTable, SampleRow,
    SurrogateSource, WeightedNorms, SAMPLE_COLUMNS,
};
use tpwake_core::periodic::{
    gamma_h, multiplier_diag, phi_perp, phi_perp_fixed, ConstantsRecord, MultiplierOrder, MultiplierReport, Truncation,
};
use tpwake_core::quadrature::{
    convolve_r3, verify_conv_exp, verify_exp_shift, verify_farwig, verify_wake_conv, window_change, window_radii,
    ExpShiftReport, QuadratureSpec, Support, VerifierReport,
};
use tpwake_core::solver::{
    fixedpoint_residual, nonlinear_modes, picard_solve, read_dump, residual_points, solve_linear, spectral_divergence,
    write_dump, CutoffSpec, FarFieldSources, PicardOutcome, ResidualReport, TimePeriodicField,
};
use tpwake_core::steady::{gamma0, grad_phi0, phi0, verify_gamma0_bounds, verify_grad_phi0_bound, KernelBoundReport, SampleSpec};
use tpwake_core::{geom, special, FlowParams};

use crate::config::Config;

/// Output directory plus helpers for the frozen file formats.
pub struct Output {
    pub dir: PathBuf,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(path)
    }
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

// ---------------------------------------------------------------- kernel eval

pub const KERNEL_EVAL_COLUMNS: [&str; 13] = [
    "x1", "x2", "x3", "r", "s", "phi0", "grad_phi0_norm", "gamma0_norm", "gamma_h_re", "gamma_h_im", "t", "phi_perp",
    "phi_perp_tail_bound",
];

pub fn kernel_eval(cfg: &Config, out: &Output) -> Result<PathBuf> {
    let p = cfg.flow_params()?;
    let eta = p.mode_frequency(1);
    let mut rows = vec![];
    for x in &cfg.kernel.points {
        let (pp, cert) = phi_perp(cfg.kernel.t, x, &p, &Truncation::default())?;
        let g = gamma_h(x, eta, &p)?;
        rows.push(vec![
            fmt(x[0]),
            fmt(x[1]),
            fmt(x[2]),
            fmt(geom::norm(x)),
            fmt(special::wake(x)),
            fmt(phi0(x, &p)?),
            fmt(geom::norm(&grad_phi0(x, &p)?)),
            fmt(geom::mat_norm(&gamma0(x, &p)?)),
            fmt(g.re),
            fmt(g.im),
            fmt(cfg.kernel.t),
            fmt(pp),
            fmt(cert.tail_bound),
        ]);
    }
    out.csv("kernel_eval.csv", &KERNEL_EVAL_COLUMNS, &rows)
}

// -------------------------------------------------------------- kernel verify

#[derive(Debug, Serialize)]
pub struct TruncationCheck {
    pub x: [f64; 3],
    pub k_used: usize,
    pub tail_bound: f64,
    /// `|phi_perp(K) - phi_perp(2K)|`.
    pub doubling_difference: f64,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
pub struct MultiplierSpread {
    pub order: MultiplierOrder,
    pub reports: Vec<MultiplierReport>,
    /// `max / min` of the normalized sups.
    pub spread: f64,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
pub struct KernelVerifyReport {
    pub constants: ConstantsRecord,
    pub gamma0_bounds: KernelBoundReport,
    pub grad_phi0_bound: KernelBoundReport,
    pub multipliers: Vec<MultiplierSpread>,
    pub truncation: Vec<TruncationCheck>,
    pub passed: bool,
}

pub fn truncation_checks(p: &FlowParams, radii: &[f64], seed: u64) -> Result<Vec<TruncationCheck>> {
    let mut out = vec![];
    let dirs = SampleSpec { count: 4, r_min: 1.0, r_max: 1.0, seed }.points();
    for &r in radii {
        for (j, d) in dirs.iter().enumerate() {
            let x = [r * d[0], r * d[1], r * d[2]];
            let t = p.period * j as f64 / dirs.len() as f64;
            let (_, cert) = phi_perp(t, &x, p, &Truncation::default())?;
            let k = cert.k_used;
            let a = phi_perp_fixed(t, &x, p, k);
            let b = phi_perp_fixed(t, &x, p, 2 * k);
            let diff = (a - b).norm();
            out.push(TruncationCheck { x, k_used: k, tail_bound: cert.tail_bound, doubling_difference: diff, passed: diff <= cert.tail_bound });
        }
    }
    Ok(out)
}

/// Direction count of the meridian scan; the kernels are axisymmetric about `e1`.
pub const MULTIPLIER_DIRECTIONS: usize = 17;

/// Per radius, the report of the worst direction on the sphere `|x| = r`.
pub fn multiplier_spreads(p: &FlowParams, gamma: f64, radii: &[f64]) -> Result<Vec<MultiplierSpread>> {
    let mut out = vec![];
    for order in [MultiplierOrder::Zero, MultiplierOrder::Derivative(0)] {
        let mut reports = vec![];
        for &r in radii {
            let mut worst: Option<MultiplierReport> = None;
            for i in 0..MULTIPLIER_DIRECTIONS {
                let th = std::f64::consts::PI * i as f64 / (MULTIPLIER_DIRECTIONS - 1) as f64;
                let x = [r * th.cos(), r * th.sin(), 0.0];
                let rep = multiplier_diag(order, &x, gamma, p)?;
                if worst.as_ref().is_none_or(|w| rep.normalized > w.normalized) {
                    worst = Some(rep);
                }
            }
            reports.push(worst.expect("nonempty scan"));
        }
        let hi = reports.iter().map(|r| r.normalized).fold(0.0, f64::max);
        let lo = reports.iter().map(|r| r.normalized).fold(f64::INFINITY, f64::min);
        let spread = hi / lo;
        out.push(MultiplierSpread { order, reports, spread, passed: spread < 3.0 });
    }
    Ok(out)
}

pub fn kernel_verify(cfg: &Config, seed: u64, out: &Output) -> Result<KernelVerifyReport> {
    let p = cfg.flow_params()?;
    let k = &cfg.kernel;
    let samples = SampleSpec { count: k.bound_samples, r_min: k.bound_r_min, r_max: k.bound_r_max, seed };
    let multipliers = multiplier_spreads(&p, k.multiplier_gamma, &k.multiplier_radii)?;
    let truncation = truncation_checks(&p, &k.truncation_radii, seed)?;
    let passed = multipliers.iter().all(|m| m.passed) && truncation.iter().all(|t| t.passed);
    let report = KernelVerifyReport {
        constants: ConstantsRecord::new(&p),
        gamma0_bounds: verify_gamma0_bounds(&p, &samples)?,
        grad_phi0_bound: verify_grad_phi0_bound(&p, &samples)?,
        multipliers,
        truncation,
        passed,
    };
    out.json("kernel_verify.json", &report)?;
    Ok(report)
}

// ---------------------------------------------------------------- conv verify

#[derive(Debug, Serialize)]
pub struct WindowedVerifier {
    pub name: String,
    pub windows: Vec<VerifierReport>,
    pub change: f64,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
pub struct NewtonCheck {
    pub x: [f64; 3],
    pub value: f64,
    pub expected: f64,
    pub error_estimate: f64,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
pub struct ConvVerifyReport {
    pub verifiers: Vec<WindowedVerifier>,
    pub newton: NewtonCheck,
    pub passed: bool,
}

/// Newton potential of the unit ball at `|x| = 2`: `1/6`.
pub fn newton_check() -> Result<NewtonCheck> {
    let kernel = |z: &[f64; 3]| 1.0 / (4.0 * std::f64::consts::PI * geom::norm(z));
    let ball = |y: &[f64; 3]| if geom::norm(y) <= 1.0 { 1.0 } else { 0.0 };
    let x = [0.0, 2.0, 0.0];
    let r = convolve_r3(&kernel, &ball, Support::Ball { radius: 1.0 }, &x, &QuadratureSpec::default())?;
    let expected = 1.0 / 6.0;
    Ok(NewtonCheck { x, value: r.value[0], expected, error_estimate: r.error_estimate, passed: (r.value[0] - expected).abs() <= 1e-4 })
}

type VerifierFn = Box<dyn Fn(&[f64]) -> tpwake_core::Result<VerifierReport>>;

pub fn conv_verifiers(p: FlowParams) -> Vec<(&'static str, VerifierFn)> {
    vec![
        ("farwig_a3_b1_d0", Box::new(move |r: &[f64]| verify_farwig(3.0, 1.0, 0, &p, r))),
        ("farwig_a3.5_b0_d1", Box::new(move |r: &[f64]| verify_farwig(3.5, 0.0, 1, &p, r))),
        ("conv_exp_a2.5_b4.5_alpha0.5", Box::new(|r: &[f64]| verify_conv_exp(2.5, 4.5, 0.5, r))),
        ("wake_conv_a2.5_b1", Box::new(|r: &[f64]| verify_wake_conv(2.5, 1.0, r))),
    ]
}

pub fn run_windowed(name: &str, f: &VerifierFn, windows: &[[f64; 2]; 2], count: usize, max_change: f64) -> Result<WindowedVerifier> {
    let reports = windows
        .iter()
        .map(|w| f(&window_radii(w[0], w[1], count)))
        .collect::<tpwake_core::Result<Vec<_>>>()?;
    let change = window_change(&reports[0], &reports[1]);
    Ok(WindowedVerifier { name: name.into(), windows: reports, change, passed: change < max_change })
}

pub fn conv_verify(cfg: &Config, out: &Output) -> Result<ConvVerifyReport> {
    let p = cfg.flow_params()?;
    let c = &cfg.conv;
    let verifiers = conv_verifiers(p)
        .iter()
        .map(|(name, f)| run_windowed(name, f, &c.windows, c.radii_per_window, c.max_change))
        .collect::<Result<Vec<_>>>()?;
    let newton = newton_check()?;
    let passed = newton.passed && verifiers.iter().all(|v| v.passed);
    let report = ConvVerifyReport { verifiers, newton, passed };
    out.json("conv_verify.json", &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------- solve

#[derive(Debug, Serialize)]
pub struct SolveReport {
    pub kind: String,
    pub n: usize,
    pub half_length: f64,
    pub k_max: usize,
    pub history: Vec<f64>,
    pub max_divergence: f64,
    pub hermitian_defect: f64,
    /// L2 norm of each mode `k = -K..K`.
    pub mode_norms: Vec<f64>,
    /// L2 norm of `u - u_linear`.
    pub nonlinear_correction: f64,
    pub dump: String,
}

fn mode_norms(u: &TimePeriodicField) -> Vec<f64> {
    u.modes.iter().map(|m| m.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>().sqrt()).collect()
}

fn max_divergence(u: &TimePeriodicField) -> f64 {
    u.modes.iter().map(|m| spectral_divergence(m, &u.grid)).fold(0.0, f64::max)
}

pub fn solve(cfg: &Config, nonlinear: bool, out: &Output) -> Result<(PicardOutcome, SolveReport)> {
    let p = cfg.flow_params()?;
    let g = cfg.grid()?;
    let f = &cfg.scenario.forcing;
    let k = cfg.scenario.k_max;
    let outcome = if nonlinear {
        picard_solve(f, &p, &g, k, &cfg.picard)?
    } else {
        let u = solve_linear(f, &p, &g, k)?;
        PicardOutcome { nonlinear: nonlinear_modes(&u), linear: u.clone(), field: u, history: vec![], collocation_times: 4 * k + 1 }
    };
    let kind = if nonlinear { "nonlinear" } else { "linear" };
    let name = format!("field_{kind}.tposn");
    let file = File::create(out.path(&name)).with_context(|| format!("creating {name}"))?;
    let mut w = BufWriter::new(file);
    write_dump(&outcome.field, &mut w)?;
    w.flush()?;
    let report = SolveReport {
        kind: kind.into(),
        n: g.n,
        half_length: g.half_length,
        k_max: k,
        history: outcome.history.clone(),
        max_divergence: max_divergence(&outcome.field),
        hermitian_defect: outcome.field.hermitian_defect(),
        mode_norms: mode_norms(&outcome.field),
        nonlinear_correction: outcome.field.sub(&outcome.linear).l2(),
        dump: name,
    };
    out.json(&format!("solve_{kind}.json"), &report)?;
    Ok((outcome, report))
}

/// Picard outcome from a dump (linear part and `A(u)` recomputed) or a fresh solve.
pub fn obtain_solution(cfg: &Config, field: Option<&Path>) -> Result<PicardOutcome> {
    let p = cfg.flow_params()?;
    let f = &cfg.scenario.forcing;
    match field {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let u = read_dump(std::io::BufReader::new(file))?;
            if u.params != p {
                anyhow::bail!("dump parameters {:?} differ from the config {:?}", u.params, p);
            }
            let linear = solve_linear(f, &p, &u.grid, u.k_max)?;
            let k = u.k_max;
            Ok(PicardOutcome { nonlinear: nonlinear_modes(&u), linear, field: u, history: vec![], collocation_times: 4 * k + 1 })
        }
        None => Ok(picard_solve(f, &p, &cfg.grid()?, cfg.scenario.k_max, &cfg.picard)?),
    }
}

// ------------------------------------------------------------------ decay fit

#[derive(Debug, Serialize)]
pub struct DecayReport {
    pub fits: Vec<Result<DecayFitReport, String>>,
    pub norms: Option<WeightedNorms>,
    pub surrogate: Vec<Result<DecayFitReport, String>>,
}

pub fn sample_rows_csv(rows: &[SampleRow]) -> Vec<Vec<String>> {
    rows.iter().map(|r| r.csv_fields()).collect()
}

pub fn decay_fit(cfg: &Config, field: Option<&Path>, out: &Output) -> Result<DecayReport> {
    let p = cfg.flow_params()?;
    let outcome = obtain_solution(cfg, field)?;
    let sources = FarFieldSources::from_nonlinear(&outcome.nonlinear, Some(&cfg.scenario.forcing));
    let d = &cfg.decay;
    let sampling = tpwake_core::harness::SamplingSpec { far: cfg.far_field, ..d.sampling };
    let mut all_rows = vec![];
    for (i, ray) in d.rays.iter().enumerate() {
        let rows = sample_quantities(&sources, ray, &sampling)?;
        out.csv(&format!("samples_ray{i}.csv"), &SAMPLE_COLUMNS, &sample_rows_csv(&rows))?;
        all_rows.push(rows);
    }
    let fits = d
        .fits
        .iter()
        .map(|t| {
            let samples: Vec<_> = all_rows[t.ray].iter().filter_map(|r| r.decay_sample(&t.quantity)).collect();
            let name = format!("ray{}:{}", t.ray, t.quantity);
            fit_decay(&name, &samples, t.window).map_err(|e| format!("{name}: {e}"))
        })
        .collect();
    let s = cfg.cutoff_s();
    let inside: Vec<SampleRow> = all_rows.iter().flatten().filter(|r| r.r > s && r.flag.is_none()).cloned().collect();
    let norms = weighted_norms(&inside, &p, s, d.norms_epsilon, None).ok();
    let sur = &cfg.surrogate;
    let table = KernelTable::build(&p, sur.spec.kernel_radius, sur.spec.table_angles)?;
    let alpha = sur.alpha.unwrap_or_else(|| ConstantsRecord::new(&p).k);
    let surrogate = sur
        .exponents
        .iter()
        .map(|&a| {
            let src = SurrogateSource { amplitude: 1.0, exponent: a, alpha };
            kernel_surrogate_decay(&table, &src, &sur.radii, &sur.spec).map_err(|e| format!("surrogate a = {a}: {e}"))
        })
        .collect();
    let report = DecayReport { fits, norms, surrogate };
    out.json("decay_fits.json", &report)?;
    Ok(report)
}

// --------------------------------------------------------- fixedpoint residual

pub fn fixedpoint(cfg: &Config, field: Option<&Path>, seed: u64, out: &Output) -> Result<ResidualReport> {
    let outcome = obtain_solution(cfg, field)?;
    let f = &cfg.scenario.forcing;
    let s = cfg.cutoff_s();
    let cutoff = CutoffSpec::new(s, f.radius + geom::norm(&f.center))?;
    let r = &cfg.residual;
    let points = residual_points(r.count, r.lo_factor * s, r.hi_factor * s, seed);
    let report = fixedpoint_residual(&outcome, f, &cutoff, &points, &cfg.far_field, &r.spec)?;
    out.json("fixedpoint_residual.json", &report)?;
    Ok(report)
}

// ------------------------------------------------------------------ selfcheck

pub const SELFCHECK_COLUMNS: [&str; 7] = ["a", "S", "samples", "seed", "violations", "min_slack_wake", "min_slack_abs"];

#[derive(Debug, Serialize)]
pub struct SelfcheckReport {
    pub battery: Vec<ExpShiftReport>,
    pub passed: bool,
}

pub fn selfcheck(cfg: &Config, seed: u64, out: &Output) -> Result<SelfcheckReport> {
    let battery = cfg
        .selfcheck
        .pairs
        .iter()
        .enumerate()
        .map(|(i, [a, s])| verify_exp_shift(*a, *s, cfg.selfcheck.samples, seed.wrapping_add(i as u64)))
        .collect::<tpwake_core::Result<Vec<_>>>()?;
    let rows: Vec<Vec<String>> = battery
        .iter()
        .map(|b| {
            vec![fmt(b.a), fmt(b.s), b.samples.to_string(), b.seed.to_string(), b.violations.to_string(), fmt(b.min_slack_wake), fmt(b.min_slack_abs)]
        })
        .collect();
    out.csv("selfcheck.csv", &SELFCHECK_COLUMNS, &rows)?;
    let passed = battery.iter().all(|b| b.passed);
    let report = SelfcheckReport { battery, passed };
    out.json("selfcheck.json", &report)?;
    Ok(report)
}
