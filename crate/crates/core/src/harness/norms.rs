//! Discrete weighted norms over sample rows.

use serde::{Deserialize, Serialize};

use super::SampleRow;
use crate::error::{invalid, Error, Result};
use crate::periodic::ConstantsRecord;
use crate::special::FlowParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedNorms {
    pub velnorm: f64,
    pub vortnorm: f64,
    pub s: f64,
    pub epsilon: f64,
    pub k_const: f64,
    /// Number of rows and radius range `[min, max]`.
    pub samples: usize,
    pub radius_range: [f64; 2],
}

fn finite(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Suprema over `rows` (all with `|x| > S`) of
///
/// * velnorm: `|x|(1+s)|v| + (|x|(1+s))^{3/2}|grad v|` plus `|x|^3 sup_t|w| + |x|^4 sup_t|grad w|`,
/// * vortnorm: `|x|^{3/2} e^{s(Kx)/(1+S)} |curl v|` plus `|x|^{9/2-eps} e^{s(Kx)/(1+S)} sup_t|curl w|`.
///
/// The periodic suprema over time are taken per quantity, so the periodic velocity term
/// is an upper bound of the joint supremum. Skipped (NaN) columns contribute zero.
/// `k_const = None` takes `K` from [`ConstantsRecord`].
pub fn weighted_norms(
    rows: &[SampleRow],
    params: &FlowParams,
    s: f64,
    epsilon: f64,
    k_const: Option<f64>,
) -> Result<WeightedNorms> {
    if rows.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(invalid("epsilon", "must lie in (0, 1/4)"));
    }
    if !(s > 0.0) {
        return Err(invalid("S", "must be positive"));
    }
    let k = k_const.unwrap_or_else(|| ConstantsRecord::new(params).k);
    let mut sup = [0.0f64; 4];
    let mut range = [f64::INFINITY, 0.0f64];
    for row in rows {
        if row.r <= s {
            return Err(invalid("rows", format!("sample at |x| = {} is not in |x| > S", row.r)));
        }
        range = [range[0].min(row.r), range[1].max(row.r)];
        let a = row.r * (1.0 + row.s);
        let e = (k * row.s / (1.0 + s)).exp();
        sup[0] = sup[0].max(a * finite(row.v) + a.powf(1.5) * finite(row.grad_v));
        sup[1] = sup[1].max(row.r.powi(3) * finite(row.w_sup) + row.r.powi(4) * finite(row.grad_w_sup));
        sup[2] = sup[2].max(row.r.powf(1.5) * e * finite(row.curl_v));
        sup[3] = sup[3].max(row.r.powf(4.5 - epsilon) * e * finite(row.curl_w_sup));
    }
    Ok(WeightedNorms {
        velnorm: sup[0] + sup[1],
        vortnorm: sup[2] + sup[3],
        s,
        epsilon,
        k_const: k,
        samples: rows.len(),
        radius_range: range,
    })
}
