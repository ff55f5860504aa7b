//! Stationary lifetime sequences in three dependence regimes, and censored
//! samples built from them.
//!
//! Lifetimes are subordinated to a unit-variance Gaussian driver `ξ` through
//! `T_i = F⁻¹(Φ(ξ_i))`, so their marginal law is exactly `F` whatever the
//! dependence of `ξ`. The driver is i.i.d., a stationary AR(1) (geometrically
//! φ-mixing, documented only), or long range dependent with covariance
//! `k^{-d} l₀(k)`, simulated exactly by circulant embedding. Censoring times are
//! i.i.d. from `G` on a separate random stream.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{censoring_overlay, CensoredSample, TrueModel};
use crate::marginal::Marginal;
use crate::rng::{Purpose, RngStream};

/// Eigenvalues in `[-CLAMP_LIMIT, 0)` are set to zero, anything lower is an error.
pub const CLAMP_LIMIT: f64 = 1e-8;

/// The slowly varying factor `l₀` in `Cov(ξ_i, ξ_{i+k}) = k^{-d} l₀(k)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SlowlyVarying {
    /// `l₀ ≡ value`. With `value = 1` the lag-one correlation is 1 while later
    /// lags are below 1, which no stationary sequence can have, so the
    /// generator rejects it; it remains usable for exact variance sums.
    Constant { value: f64 },
    /// `l₀(k) = log(e + k)^exponent`.
    LogPower { exponent: f64 },
    /// `l₀(k) = (k / (k + 1))^d`, i.e. `Cov(k) = (1 + k)^{-d}`; tends to 1.
    #[default]
    Shifted,
}

impl SlowlyVarying {
    pub fn at(&self, k: f64, d: f64) -> f64 {
        match *self {
            SlowlyVarying::Constant { value } => value,
            SlowlyVarying::LogPower { exponent } => (std::f64::consts::E + k).ln().powf(exponent),
            SlowlyVarying::Shifted => (k / (k + 1.0)).powf(d),
        }
    }
}

/// Covariance function of a long range dependent Gaussian driver.
#[derive(Clone, Debug, PartialEq)]
pub struct LrdCovariance {
    pub d: f64,
    pub l0: SlowlyVarying,
}

impl LrdCovariance {
    pub fn new(d: f64, l0: SlowlyVarying) -> Result<Self> {
        if !(d > 0.0 && d < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "d = {d} must lie in (0, 1)"
            )));
        }
        Ok(LrdCovariance { d, l0 })
    }

    pub fn at(&self, lag: usize) -> f64 {
        if lag == 0 {
            1.0
        } else {
            let k = lag as f64;
            k.powf(-self.d) * self.l0.at(k, self.d)
        }
    }
}

/// Dependence of the Gaussian driver of the lifetimes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dependence {
    Iid,
    /// Stationary Gaussian AR(1) with lag-k correlation `rho^k`.
    MixingAr {
        rho: f64,
    },
    Lrd {
        d: f64,
        #[serde(default)]
        l0: SlowlyVarying,
    },
}

/// Joint law of lifetimes and censoring times. Censoring times are always
/// i.i.d. and independent of the lifetimes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependenceModel {
    pub dependence: Dependence,
    pub lifetime: Marginal,
    pub censor: Marginal,
}

impl DependenceModel {
    pub fn validate(&self) -> Result<()> {
        match self.dependence {
            Dependence::Iid => {}
            Dependence::MixingAr { rho } => {
                if !(rho.abs() < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "|rho| = {} must be < 1",
                        rho.abs()
                    )));
                }
            }
            Dependence::Lrd { d, .. } => {
                LrdCovariance::new(d, SlowlyVarying::Shifted)?;
            }
        }
        self.true_model().map(|_| ())
    }

    pub fn true_model(&self) -> Result<TrueModel> {
        TrueModel::new(self.lifetime.clone(), self.censor.clone())
    }

    /// Covariance of the Gaussian driver at a lag.
    pub fn driver_covariance(&self, lag: usize) -> f64 {
        match &self.dependence {
            Dependence::Iid => f64::from(u8::from(lag == 0)),
            Dependence::MixingAr { rho } => rho.powi(lag as i32),
            Dependence::Lrd { d, l0 } => LrdCovariance {
                d: *d,
                l0: l0.clone(),
            }
            .at(lag),
        }
    }

    pub fn is_long_range(&self) -> bool {
        matches!(self.dependence, Dependence::Lrd { .. })
    }
}

pub fn gen_gaussian_iid(n: usize, stream: &RngStream) -> Vec<f64> {
    let mut rng = stream.rng();
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Stationary AR(1) started from its stationary law, unit marginal variance.
pub fn gen_gaussian_ar1(rho: f64, n: usize, stream: &RngStream) -> Result<Vec<f64>> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "|rho| = {} must be < 1",
            rho.abs()
        )));
    }
    let mut rng = stream.rng();
    let innovation_sd = (1.0 - rho * rho).sqrt();
    let mut out = Vec::with_capacity(n);
    let mut prev: f64 = rng.sample(StandardNormal);
    if n > 0 {
        out.push(prev);
    }
    for _ in 1..n {
        let e: f64 = rng.sample(StandardNormal);
        prev = rho * prev + innovation_sd * e;
        out.push(prev);
    }
    Ok(out)
}

/// Exact sampler for a stationary Gaussian sequence of fixed length whose
/// covariance is embedded in a circulant of size `2n`.
#[derive(Clone)]
pub struct CirculantEmbedding {
    n: usize,
    // sqrt(λ_j / m) for the circulant eigenvalues λ_j
    scales: Vec<f64>,
    clamped_mass: f64,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CirculantEmbedding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantEmbedding")
            .field("n", &self.n)
            .field("clamped_mass", &self.clamped_mass)
            .finish()
    }
}

impl CirculantEmbedding {
    pub fn new<C: Fn(usize) -> f64>(cov: C, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "series length {n} must be at least 2"
            )));
        }
        let m = 2 * n;
        let mut row: Vec<Complex<f64>> = (0..m)
            .map(|j| {
                let lag = if j <= n { j } else { m - j };
                Complex::new(cov(lag), 0.0)
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        fft.process(&mut row);

        let mut clamped_mass = 0.0;
        let mut scales = Vec::with_capacity(m);
        for (index, lambda) in row.iter().map(|c| c.re).enumerate() {
            if lambda < -CLAMP_LIMIT {
                return Err(Error::NegativeEigenvalue {
                    index,
                    value: lambda,
                });
            }
            if lambda < 0.0 {
                clamped_mass += -lambda;
            }
            scales.push((lambda.max(0.0) / m as f64).sqrt());
        }
        Ok(CirculantEmbedding {
            n,
            scales,
            clamped_mass,
            fft,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Total magnitude of eigenvalues clamped to zero.
    pub fn clamped_mass(&self) -> f64 {
        self.clamped_mass
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = self
            .scales
            .iter()
            .map(|&s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(s * re, s * im)
            })
            .collect();
        self.fft.process(&mut buf);
        buf.truncate(self.n);
        buf.into_iter().map(|c| c.re).collect()
    }
}

/// Gaussian sequence with `Cov(k) = k^{-d} l₀(k)`, `Cov(0) = 1`.
pub fn gen_gaussian_lrd(
    d: f64,
    l0: &SlowlyVarying,
    n: usize,
    stream: &RngStream,
) -> Result<Vec<f64>> {
    let cov = LrdCovariance::new(d, l0.clone())?;
    let embedding = CirculantEmbedding::new(|k| cov.at(k), n)?;
    Ok(embedding.sample(&mut stream.rng()))
}

/// `t_i = F⁻¹(Φ(ξ_i))`.
pub fn subordinate(xi: &[f64], law: &Marginal) -> Vec<f64> {
    xi.iter().map(|&x| law.from_normal_score(x)).collect()
}

/// Reusable generator for one model and sample size; the circulant
/// factorisation is computed once.
#[derive(Clone, Debug)]
pub struct SampleGenerator {
    model: DependenceModel,
    n: usize,
    embedding: Option<CirculantEmbedding>,
}

impl SampleGenerator {
    pub fn new(model: &DependenceModel, n: usize) -> Result<Self> {
        model.validate()?;
        if n == 0 {
            return Err(Error::EmptySample);
        }
        let embedding = match &model.dependence {
            Dependence::Lrd { d, l0 } => {
                let cov = LrdCovariance::new(*d, l0.clone())?;
                Some(CirculantEmbedding::new(|k| cov.at(k), n.max(2))?)
            }
            _ => None,
        };
        Ok(SampleGenerator {
            model: model.clone(),
            n,
            embedding,
        })
    }

    pub fn model(&self) -> &DependenceModel {
        &self.model
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }

    /// The Gaussian driver for one replication.
    pub fn driver(&self, stream: &RngStream) -> Result<Vec<f64>> {
        match &self.model.dependence {
            Dependence::Iid => Ok(gen_gaussian_iid(self.n, stream)),
            Dependence::MixingAr { rho } => gen_gaussian_ar1(*rho, self.n, stream),
            Dependence::Lrd { .. } => {
                let emb = self.embedding.as_ref().expect("built in new");
                let mut xi = emb.sample(&mut stream.rng());
                xi.truncate(self.n);
                Ok(xi)
            }
        }
    }

    pub fn censoring_times(&self, stream: &RngStream) -> Vec<f64> {
        let mut rng = stream.for_purpose(Purpose::Censoring).rng();
        let law = &self.model.censor;
        (0..self.n)
            .map(|_| {
                let u: f64 = rng.random();
                law.quantile(u)
            })
            .collect()
    }

    pub fn generate(&self, stream: &RngStream) -> Result<CensoredSample> {
        let xi = self.driver(stream)?;
        let lifetimes = subordinate(&xi, &self.model.lifetime);
        let censors = self.censoring_times(stream);
        censoring_overlay(&lifetimes, &censors)
    }
}

pub fn gen_censored_sample(
    model: &DependenceModel,
    n: usize,
    stream: &RngStream,
) -> Result<CensoredSample> {
    SampleGenerator::new(model, n)?.generate(stream)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_model(dependence: Dependence) -> DependenceModel {
        DependenceModel {
            dependence,
            lifetime: Marginal::Exponential { rate: 1.0 },
            censor: Marginal::Exponential { rate: 0.5 },
        }
    }

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    #[test]
    fn iid_basic_contract() {
        let s = RngStream::new(11, 0);
        let x = gen_gaussian_iid(100_000, &s);
        assert!(mean(&x).abs() < 3.0 / (x.len() as f64).sqrt());
        assert_eq!(x, gen_gaussian_iid(100_000, &s));
        assert_eq!(gen_gaussian_iid(1, &s).len(), 1);
    }

    #[test]
    fn ar1_lag_one_autocovariance() {
        let n = 100_000;
        let x = gen_gaussian_ar1(0.5, n, &RngStream::new(5, 2)).unwrap();
        let lag1: Vec<f64> = x.windows(2).map(|w| w[0] * w[1]).collect();
        let est = mean(&lag1);
        // MC standard error of the lag-1 product mean for a Gaussian AR(1):
        // Var(x_t x_{t+1}) = 1 + rho^2, inflated by the correlation of products.
        let rho: f64 = 0.5;
        let long_run = (1.0 + rho * rho)
            + 2.0
                * (1..200)
                    .map(|k| {
                        // Cov(x_0 x_1, x_k x_{k+1}) = rho^{2k} + rho^{k-1} rho^{k+1}
                        rho.powi(2 * k) + rho.powi(k - 1) * rho.powi(k + 1)
                    })
                    .sum::<f64>();
        let se = (long_run / n as f64).sqrt();
        assert!((est - 0.5).abs() < 3.0 * se, "est {est} se {se}");
    }

    #[test]
    fn ar1_rejects_unit_root() {
        assert!(gen_gaussian_ar1(1.0, 10, &RngStream::new(0, 0)).is_err());
        assert!(gen_gaussian_ar1(-1.2, 10, &RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn ar1_with_zero_rho_is_white() {
        let x = gen_gaussian_ar1(0.0, 50_000, &RngStream::new(9, 9)).unwrap();
        let lag1 = mean(&x.windows(2).map(|w| w[0] * w[1]).collect::<Vec<_>>());
        assert!(lag1.abs() < 3.0 / (50_000f64).sqrt());
    }

    #[test]
    fn literal_unit_l0_is_not_embeddable() {
        let err = gen_gaussian_lrd(
            0.4,
            &SlowlyVarying::Constant { value: 1.0 },
            1024,
            &RngStream::new(1, 0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NegativeEigenvalue { .. }));
    }

    #[test]
    fn embedding_reproduces_covariance_exactly() {
        // Inverse DFT of the squared scales returns the covariance row.
        let cov = LrdCovariance::new(0.3, SlowlyVarying::Shifted).unwrap();
        let n = 64;
        let emb = CirculantEmbedding::new(|k| cov.at(k), n).unwrap();
        assert_eq!(emb.clamped_mass(), 0.0);
        let m = 2 * n;
        for lag in [0usize, 1, 5, 40, 64] {
            let c: f64 = emb
                .scales
                .iter()
                .enumerate()
                .map(|(j, s)| {
                    s * s * (2.0 * std::f64::consts::PI * (j * lag) as f64 / m as f64).cos()
                })
                .sum();
            assert!((c - cov.at(lag)).abs() < 1e-12, "lag {lag}");
        }
    }

    #[test]
    fn lrd_generator_is_deterministic() {
        let s = RngStream::new(3, 17);
        let a = gen_gaussian_lrd(0.2, &SlowlyVarying::Shifted, 512, &s).unwrap();
        let b = gen_gaussian_lrd(0.2, &SlowlyVarying::Shifted, 512, &s).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 512);
    }

    #[test]
    fn lrd_parameter_checks() {
        assert!(LrdCovariance::new(0.0, SlowlyVarying::Shifted).is_err());
        assert!(LrdCovariance::new(1.0, SlowlyVarying::Shifted).is_err());
        // Σ|Cov(k)| grows without bound for d = 0.99
        let cov = LrdCovariance::new(0.99, SlowlyVarying::Shifted).unwrap();
        let partial = |n: usize| (1..n).map(|k| cov.at(k)).sum::<f64>();
        assert!(partial(100_000) > partial(1_000) + 1.0);
    }

    #[test]
    fn subordination_examples() {
        let xi = [-1.0, 0.0, 2.5];
        assert_eq!(subordinate(&xi, &Marginal::standard_normal()), xi.to_vec());
        let t = subordinate(&[0.0], &Marginal::Exponential { rate: 1.0 });
        assert!((t[0] - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn subordination_preserves_ranks() {
        let xi = gen_gaussian_iid(1000, &RngStream::new(2, 2));
        let t = subordinate(
            &xi,
            &Marginal::Weibull {
                shape: 0.8,
                scale: 3.0,
            },
        );
        let rank = |v: &[f64]| {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
            idx
        };
        assert_eq!(rank(&xi), rank(&t));
    }

    #[test]
    fn iid_event_fraction() {
        let model = exp_model(Dependence::Iid);
        let n = 10_000;
        let s = gen_censored_sample(&model, n, &RngStream::new(42, 0)).unwrap();
        let frac = s.event_count() as f64 / n as f64;
        let p = 2.0 / 3.0;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((frac - p).abs() < 3.0 * se, "{frac}");
    }

    #[test]
    fn no_censoring_means_all_events() {
        let model = DependenceModel {
            dependence: Dependence::MixingAr { rho: 0.3 },
            lifetime: Marginal::Exponential { rate: 1.0 },
            censor: Marginal::Never,
        };
        let s = gen_censored_sample(&model, 500, &RngStream::new(1, 1)).unwrap();
        assert_eq!(s.event_count(), 500);
    }

    #[test]
    fn censoring_stream_is_independent_of_lifetimes() {
        let model = exp_model(Dependence::Lrd {
            d: 0.3,
            l0: SlowlyVarying::Shifted,
        });
        let n = 20_000;
        let generator = SampleGenerator::new(&model, n).unwrap();
        let stream = RngStream::new(8, 4);
        let t = subordinate(&generator.driver(&stream).unwrap(), &model.lifetime);
        let c = generator.censoring_times(&stream);
        // Spearman-type check on normal scores keeps the statistic distribution-free.
        let zt: Vec<f64> = t
            .iter()
            .map(|&x| model.lifetime.to_normal_score(x))
            .collect();
        let zc: Vec<f64> = c.iter().map(|&x| model.censor.to_normal_score(x)).collect();
        let corr = mean(&zt.iter().zip(&zc).map(|(a, b)| a * b).collect::<Vec<_>>());
        // independence: each product has unit variance; the censor side is i.i.d.
        assert!(corr.abs() < 3.0 / (n as f64).sqrt(), "{corr}");
    }

    #[test]
    fn model_serde_round_trip() {
        let text = r#"
            lifetime = { family = "exponential", rate = 1.0 }
            censor = { family = "never" }
            [dependence]
            variant = "lrd"
            d = 0.2
        "#;
        let m: DependenceModel = toml::from_str(text).unwrap();
        assert_eq!(
            m.dependence,
            Dependence::Lrd {
                d: 0.2,
                l0: SlowlyVarying::Shifted
            }
        );
        m.validate().unwrap();
    }
}
