//! Kolmogorov-Smirnov statistics with asymptotic critical values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginal::std_normal_cdf;

pub const MIN_KS_SAMPLE: usize = 30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub critical_value: f64,
    pub alpha: f64,
    pub sizes: Vec<usize>,
    pub pass: bool,
}

/// `c(α) = sqrt(-ln(α/2) / 2)`, the asymptotic Kolmogorov quantile.
pub fn kolmogorov_c(alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt()
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> Result<KsResult> {
    for s in [a, b] {
        if s.len() < MIN_KS_SAMPLE {
            return Err(Error::SampleTooSmall {
                size: s.len(),
                min: MIN_KS_SAMPLE,
            });
        }
    }
    let (x, y) = (sorted(a), sorted(b));
    let (m, n) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / m - j as f64 / n).abs());
    }
    let critical = kolmogorov_c(alpha) * ((m + n) / (m * n)).sqrt();
    Ok(KsResult {
        statistic: d,
        critical_value: critical,
        alpha,
        sizes: vec![x.len(), y.len()],
        pass: d <= critical,
    })
}

/// One-sample statistic against the standard normal law.
pub fn ks_one_sample_normal(a: &[f64], alpha: f64) -> Result<KsResult> {
    if a.len() < MIN_KS_SAMPLE {
        return Err(Error::SampleTooSmall {
            size: a.len(),
            min: MIN_KS_SAMPLE,
        });
    }
    let x = sorted(a);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = std_normal_cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let critical = kolmogorov_c(alpha) / n.sqrt();
    Ok(KsResult {
        statistic: d,
        critical_value: critical,
        alpha,
        sizes: vec![x.len()],
        pass: d <= critical,
    })
}
