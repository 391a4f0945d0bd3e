//! JSON run configuration. Every section has defaults; a supplied section must be
//! complete where its fields are required (for example `scenario.params.lambda`).

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use tpwake_core::harness::{FitWindow, RaySpec, SamplingSpec, SurrogateSpec};
use tpwake_core::solver::{FarFieldSpec, ForcingSpec, Grid, PicardSpec, ResidualSpec};
use tpwake_core::FlowParams;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub lambda: f64,
    pub period: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub params: Params,
    #[serde(default = "default_forcing")]
    pub forcing: ForcingSpec,
    #[serde(default = "default_grid")]
    pub grid: Grid,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
}

fn default_forcing() -> ForcingSpec {
    ForcingSpec::standard(0.05, 1.0)
}

fn default_grid() -> Grid {
    Grid { n: 64, half_length: 8.0 }
}

fn default_k_max() -> usize {
    8
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            params: Params { lambda: 1.0, period: 2.0 * std::f64::consts::PI },
            forcing: default_forcing(),
            grid: default_grid(),
            k_max: default_k_max(),
        }
    }
}

/// Kernel tabulation and bound scans.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub points: Vec<[f64; 3]>,
    /// Time for `phi_perp` in `kernel eval`.
    pub t: f64,
    pub bound_samples: usize,
    pub bound_r_min: f64,
    pub bound_r_max: f64,
    pub multiplier_gamma: f64,
    pub multiplier_radii: Vec<f64>,
    pub truncation_radii: Vec<f64>,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            points: vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-3.0, 1.0, 0.5], [2.0, -2.0, 1.0]],
            t: 0.0,
            bound_samples: 2000,
            bound_r_min: 0.1,
            bound_r_max: 100.0,
            multiplier_gamma: 0.25,
            multiplier_radii: vec![1.0, 2.0, 4.0],
            truncation_radii: vec![1.0, 2.0, 5.0, 10.0],
        }
    }
}

/// Convolution-lemma verifiers: two radius windows per verifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvSection {
    pub windows: [[f64; 2]; 2],
    pub radii_per_window: usize,
    pub max_change: f64,
}

impl Default for ConvSection {
    fn default() -> Self {
        Self { windows: [[5.0, 50.0], [10.0, 100.0]], radii_per_window: 6, max_change: 0.1 }
    }
}

/// One fit: quantity id over a window of the samples of ray `ray`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitTarget {
    pub ray: usize,
    pub quantity: String,
    pub window: FitWindow,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecaySection {
    pub rays: Vec<RaySpec>,
    pub fits: Vec<FitTarget>,
    pub sampling: SamplingSpec,
    /// Weighted norms over the samples with `|x| > S` (`S = cutoff_s`).
    pub norms_epsilon: f64,
}

fn log_radii(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

impl Default for DecaySection {
    fn default() -> Self {
        let radii = log_radii(8.0, 30.0, 8);
        let window = FitWindow { r_min: 8.0, r_max: 30.0 };
        let sheet = FitWindow { r_min: 10.0, r_max: 40.0 };
        let near = FitWindow { r_min: 3.0, r_max: 12.0 };
        let fit = |ray: usize, q: &str, window: FitWindow| FitTarget { ray, quantity: q.into(), window };
        Self {
            rays: vec![
                RaySpec::ray(-0.999, radii.clone()).expect("static ray"),
                RaySpec::ray(1.0, radii).expect("static ray"),
                RaySpec::wake_sheet(1.0, log_radii(10.0, 40.0, 8)).expect("static ray"),
                RaySpec::ray(0.5, log_radii(3.0, 12.0, 8)).expect("static ray"),
            ],
            fits: vec![
                fit(0, "v", window),
                fit(1, "v", window),
                fit(1, "w_sup", window),
                fit(1, "grad_w_sup", window),
                fit(2, "curl_v", sheet),
                fit(3, "curl_v", near),
            ],
            sampling: SamplingSpec::default(),
            norms_epsilon: 0.1,
        }
    }
}

/// Fixed-point residual sample points: `count` seeded points with
/// `|x| in [lo_factor S, hi_factor S]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResidualSection {
    pub count: usize,
    pub lo_factor: f64,
    pub hi_factor: f64,
    pub spec: ResidualSpec,
}

impl Default for ResidualSection {
    fn default() -> Self {
        Self { count: 20, lo_factor: 1.2, hi_factor: 3.0, spec: ResidualSpec::default() }
    }
}

/// Exponential shift inequality battery.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfcheckSection {
    pub samples: usize,
    /// `(a, S)` pairs.
    pub pairs: Vec<[f64; 2]>,
}

impl Default for SelfcheckSection {
    fn default() -> Self {
        Self { samples: 100_000, pairs: vec![[1.0, 2.0], [0.5, 5.0], [2.0, 1.0]] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateSection {
    pub exponents: Vec<f64>,
    /// Source wake rate; `None` takes `K` of the constants record.
    pub alpha: Option<f64>,
    pub radii: Vec<f64>,
    pub spec: SurrogateSpec,
}

impl Default for SurrogateSection {
    fn default() -> Self {
        Self { exponents: vec![4.5, 3.0], alpha: None, radii: log_radii(10.0, 40.0, 9), spec: SurrogateSpec::default() }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub scenario: Scenario,
    pub picard: PicardSpec,
    pub far_field: FarFieldSpec,
    /// Cutoff radius `S`; `None` takes twice the forcing radius.
    pub cutoff_s: Option<f64>,
    pub kernel: KernelSection,
    pub conv: ConvSection,
    pub decay: DecaySection,
    pub surrogate: SurrogateSection,
    pub residual: ResidualSection,
    pub selfcheck: SelfcheckSection,
    pub output_dir: Option<String>,
}

impl Config {
    /// Parse JSON text; errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            anyhow::anyhow!("invalid config at `{path}`: {}", e.into_inner())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.flow_params()?;
        Grid::new(self.scenario.grid.n, self.scenario.grid.half_length).context("invalid config at `scenario.grid`")?;
        self.scenario.forcing.validate().context("invalid config at `scenario.forcing`")?;
        for (i, r) in self.decay.rays.iter().enumerate() {
            r.validate().with_context(|| format!("invalid config at `decay.rays[{i}]`"))?;
        }
        for (i, f) in self.decay.fits.iter().enumerate() {
            if f.ray >= self.decay.rays.len() {
                anyhow::bail!("invalid config at `decay.fits[{i}].ray`: no ray {}", f.ray);
            }
            if !tpwake_core::harness::QUANTITIES.contains(&f.quantity.as_str()) {
                anyhow::bail!("invalid config at `decay.fits[{i}].quantity`: unknown quantity {}", f.quantity);
            }
        }
        Ok(())
    }

    pub fn flow_params(&self) -> Result<FlowParams> {
        FlowParams::new(self.scenario.params.lambda, self.scenario.params.period).context("invalid config at `scenario.params`")
    }

    pub fn grid(&self) -> Result<Grid> {
        Ok(Grid::new(self.scenario.grid.n, self.scenario.grid.half_length)?)
    }

    pub fn cutoff_s(&self) -> f64 {
        self.cutoff_s.unwrap_or(2.0 * self.scenario.forcing.radius)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_lambda_names_the_field() {
        let err = Config::from_json(r#"{"scenario": {"params": {"period": 6.0}}}"#).unwrap_err().to_string();
        assert!(err.contains("scenario.params") && err.contains("lambda"), "{err}");
    }

    #[test]
    fn defaults_round_trip() {
        let cfg = Config::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back = Config::from_json(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
        assert!(Config::from_json("{}").is_ok());
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(Config::from_json(r#"{"scenario": {"params": {"lambda": -1.0, "period": 6.0}}}"#).is_err());
        let err = Config::from_json(r#"{"decay": {"fits": [{"ray": 5, "quantity": "v", "window": {"r_min": 1, "r_max": 2}}]}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("decay.fits[0].ray"), "{err}");
        assert!(Config::from_json(r#"{"bogus": 1}"#).is_err());
    }
}
