//! Parametric marginal laws for lifetimes and censoring times.

use libm::erfc;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn std_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    // one Newton step polishes erfc_inv to near machine precision
    let density = std_normal_pdf(x);
    if density > 0.0 {
        let resid = if x <= 0.0 {
            std_normal_cdf(x) - p
        } else {
            (1.0 - p) - std_normal_cdf(-x)
        };
        x - resid / density
    } else {
        x
    }
}

/// A continuous distribution on the real line, or the degenerate law at `+∞`
/// (`Never`, used for "no censoring").
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Marginal {
    Exponential {
        rate: f64,
    },
    Weibull {
        shape: f64,
        scale: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    #[serde(rename = "lognormal")]
    LogNormal {
        mu: f64,
        sigma: f64,
    },
    Normal {
        mean: f64,
        sd: f64,
    },
    Never,
}

impl Marginal {
    pub fn standard_normal() -> Self {
        Marginal::Normal { mean: 0.0, sd: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Marginal::Exponential { rate } => rate.is_finite() && rate > 0.0,
            Marginal::Weibull { shape, scale } => {
                shape.is_finite() && shape > 0.0 && scale.is_finite() && scale > 0.0
            }
            Marginal::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            Marginal::LogNormal { mu, sigma } => mu.is_finite() && sigma.is_finite() && sigma > 0.0,
            Marginal::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            Marginal::Never => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDistribution(format!("{self:?}")))
        }
    }

    pub fn is_never(&self) -> bool {
        matches!(self, Marginal::Never)
    }

    /// True when all mass sits on `[0, ∞]`, as lifetimes require.
    pub fn is_nonnegative(&self) -> bool {
        match *self {
            Marginal::Uniform { low, .. } => low >= 0.0,
            Marginal::Normal { .. } => false,
            _ => true,
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match *self {
            Marginal::Exponential { rate } => {
                if t <= 0.0 {
                    0.0
                } else {
                    -(-rate * t).exp_m1()
                }
            }
            Marginal::Weibull { shape, scale } => {
                if t <= 0.0 {
                    0.0
                } else {
                    -(-(t / scale).powf(shape)).exp_m1()
                }
            }
            Marginal::Uniform { low, high } => ((t - low) / (high - low)).clamp(0.0, 1.0),
            Marginal::LogNormal { mu, sigma } => {
                if t <= 0.0 {
                    0.0
                } else {
                    std_normal_cdf((t.ln() - mu) / sigma)
                }
            }
            Marginal::Normal { mean, sd } => std_normal_cdf((t - mean) / sd),
            Marginal::Never => 0.0,
        }
    }

    /// `1 - cdf(t)`, computed without cancellation in the upper tail.
    pub fn sf(&self, t: f64) -> f64 {
        match *self {
            Marginal::Exponential { rate } => {
                if t <= 0.0 {
                    1.0
                } else {
                    (-rate * t).exp()
                }
            }
            Marginal::Weibull { shape, scale } => {
                if t <= 0.0 {
                    1.0
                } else {
                    (-(t / scale).powf(shape)).exp()
                }
            }
            Marginal::Uniform { low, high } => ((high - t) / (high - low)).clamp(0.0, 1.0),
            Marginal::LogNormal { mu, sigma } => {
                if t <= 0.0 {
                    1.0
                } else {
                    std_normal_cdf(-(t.ln() - mu) / sigma)
                }
            }
            Marginal::Normal { mean, sd } => std_normal_cdf(-(t - mean) / sd),
            Marginal::Never => 1.0,
        }
    }

    pub fn density(&self, t: f64) -> f64 {
        match *self {
            Marginal::Exponential { rate } => {
                if t < 0.0 {
                    0.0
                } else {
                    rate * (-rate * t).exp()
                }
            }
            Marginal::Weibull { shape, scale } => {
                if t < 0.0 || (t == 0.0 && shape < 1.0) {
                    0.0
                } else {
                    let z = t / scale;
                    shape / scale * z.powf(shape - 1.0) * (-z.powf(shape)).exp()
                }
            }
            Marginal::Uniform { low, high } => {
                if (low..=high).contains(&t) {
                    1.0 / (high - low)
                } else {
                    0.0
                }
            }
            Marginal::LogNormal { mu, sigma } => {
                if t <= 0.0 {
                    0.0
                } else {
                    std_normal_pdf((t.ln() - mu) / sigma) / (sigma * t)
                }
            }
            Marginal::Normal { mean, sd } => std_normal_pdf((t - mean) / sd) / sd,
            Marginal::Never => 0.0,
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match *self {
            Marginal::Exponential { rate } => -(-p).ln_1p() / rate,
            Marginal::Weibull { shape, scale } => scale * (-(-p).ln_1p()).powf(1.0 / shape),
            Marginal::Uniform { low, high } => low + p * (high - low),
            Marginal::LogNormal { mu, sigma } => (mu + sigma * std_normal_quantile(p)).exp(),
            Marginal::Normal { mean, sd } => mean + sd * std_normal_quantile(p),
            Marginal::Never => f64::INFINITY,
        }
    }

    /// Inverse survival function: the `t` with `sf(t) = q`.
    pub fn isf(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        match *self {
            Marginal::Exponential { rate } => -q.ln() / rate,
            Marginal::Weibull { shape, scale } => scale * (-q.ln()).powf(1.0 / shape),
            Marginal::Uniform { low, high } => high - q * (high - low),
            Marginal::LogNormal { mu, sigma } => (mu - sigma * std_normal_quantile(q)).exp(),
            Marginal::Normal { mean, sd } => mean - sd * std_normal_quantile(q),
            Marginal::Never => f64::INFINITY,
        }
    }

    /// `F⁻¹(Φ(x))`: the increasing map sending a standard normal score to this law.
    pub fn from_normal_score(&self, x: f64) -> f64 {
        match *self {
            Marginal::LogNormal { mu, sigma } => (mu + sigma * x).exp(),
            Marginal::Normal { mean, sd } => mean + sd * x,
            _ if x <= 0.0 => self.quantile(std_normal_cdf(x)),
            _ => self.isf(std_normal_cdf(-x)),
        }
    }

    /// `Φ⁻¹(F(t))`, the inverse of [`Marginal::from_normal_score`].
    pub fn to_normal_score(&self, t: f64) -> f64 {
        match *self {
            Marginal::LogNormal { mu, sigma } => {
                if t <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    (t.ln() - mu) / sigma
                }
            }
            Marginal::Normal { mean, sd } => (t - mean) / sd,
            Marginal::Never => f64::NEG_INFINITY,
            _ => {
                let p = self.cdf(t);
                if p <= 0.5 {
                    std_normal_quantile(p)
                } else {
                    -std_normal_quantile(self.sf(t))
                }
            }
        }
    }

    /// Points where the density is discontinuous.
    pub fn knots(&self) -> Vec<f64> {
        match *self {
            Marginal::Uniform { low, high } => vec![low, high],
            Marginal::Exponential { .. } | Marginal::Weibull { .. } => vec![0.0],
            _ => Vec::new(),
        }
    }

    /// Rate of an exponential law.
    pub fn rate(&self) -> Option<f64> {
        match *self {
            Marginal::Exponential { rate } => Some(rate),
            _ => None,
        }
    }
}
