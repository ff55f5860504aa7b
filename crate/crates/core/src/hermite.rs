//! Hermite expansions of the indicator processes of a subordinated Gaussian
//! sequence, their ranks, and the normalisations they induce.
//!
//! For `t_i = min(g(ξ_i), τ_i)` with `τ_i` independent of `ξ_i`, the indicator
//! `1{t_i ≤ t, δ_i ∈ class}` has conditional probability `p(ξ_i)` given the
//! driver, and `η_k(t) = E[p(ξ) h_k(ξ)]` for `k ≥ 1`. Hermite polynomials are
//! the probabilists' ones, `E[h_j h_k] = k! 1{j = k}`.
//!
//! `p` jumps where `g` crosses `t`, so Gauss-Hermite quadrature converges
//! slowly. Coefficients are computed with composite Gauss-Legendre panels
//! under the normal density, split at every discontinuity of `p`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depgen::{DependenceModel, LrdCovariance, SlowlyVarying};
use crate::error::{Error, Result};
use crate::marginal::{std_normal_pdf, Marginal};
use crate::quadrature::GaussLegendre;

/// Probabilists' Hermite polynomial `h_k(x)`.
pub fn hermite_poly(k: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for j in 0..k {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `h_k(x) / sqrt(k!)` for `k = 0..=k_max`.
pub fn normalized_hermite_values(k_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(1.0);
    if k_max >= 1 {
        out.push(x);
    }
    for k in 1..k_max {
        let kf = k as f64;
        let next = (x * out[k] - kf.sqrt() * out[k - 1]) / (kf + 1.0).sqrt();
        out.push(next);
    }
    out
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product()
}

/// The map `g` with `t_i = g(ξ_i)` before censoring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Abs,
    /// `F⁻¹ ∘ Φ`, which makes the lifetimes `F`-distributed.
    Quantile {
        law: Marginal,
    },
}

impl Transform {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Abs => x.abs(),
            Transform::Quantile { law } => law.from_normal_score(x),
        }
    }

    pub fn is_monotone(&self) -> bool {
        !matches!(self, Transform::Abs)
    }

    /// Points `x` with `g(x) = s`.
    pub fn level_crossings(&self, s: f64) -> Vec<f64> {
        match self {
            Transform::Identity => vec![s],
            Transform::Abs => {
                if s > 0.0 {
                    vec![-s, s]
                } else if s == 0.0 {
                    vec![0.0]
                } else {
                    Vec::new()
                }
            }
            Transform::Quantile { law } => {
                let x = law.to_normal_score(s);
                if x.is_finite() {
                    vec![x]
                } else {
                    Vec::new()
                }
            }
        }
    }

    /// `P(g(ξ) ≤ t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        use crate::marginal::std_normal_cdf;
        match self {
            Transform::Identity => std_normal_cdf(t),
            Transform::Abs => {
                if t <= 0.0 {
                    0.0
                } else {
                    1.0 - 2.0 * std_normal_cdf(-t)
                }
            }
            Transform::Quantile { law } => law.cdf(t),
        }
    }

    /// `E[g(ξ)²]`, which must be finite for the expansion to exist.
    pub fn second_moment(&self) -> Result<f64> {
        let rule = GaussLegendre::new(20);
        let m: f64 = panels(&[], 30.0)
            .iter()
            .map(|&(a, b)| {
                rule.integrate(a, b, |x| {
                    let g = self.apply(x);
                    g * g * std_normal_pdf(x)
                })
            })
            .sum();
        if m.is_finite() {
            Ok(m)
        } else {
            Err(Error::InvalidParameter(format!(
                "E[g(ξ)²] is not finite for {self:?}"
            )))
        }
    }
}

/// Which indicator family: all observations, events (`δ = 1`) or censored
/// observations (`δ = 0`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventClass {
    Any,
    Event,
    Censored,
}

impl EventClass {
    pub fn label(self) -> &'static str {
        match self {
            EventClass::Any => "any",
            EventClass::Event => "event",
            EventClass::Censored => "censored",
        }
    }
}

/// An indicator family `1{min(g(ξ), τ) ≤ t, δ ∈ class}` with `τ ~ G`
/// independent of `ξ`.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorSpec {
    pub transform: Transform,
    pub censor: Marginal,
    pub class: EventClass,
}

impl IndicatorSpec {
    pub fn new(transform: Transform, censor: Marginal, class: EventClass) -> Self {
        IndicatorSpec {
            transform,
            censor,
            class,
        }
    }

    pub fn uncensored(transform: Transform) -> Self {
        IndicatorSpec::new(transform, Marginal::Never, EventClass::Any)
    }

    pub fn from_model(model: &DependenceModel, class: EventClass) -> Self {
        IndicatorSpec::new(
            Transform::Quantile {
                law: model.lifetime.clone(),
            },
            model.censor.clone(),
            class,
        )
    }

    pub fn with_class(&self, class: EventClass) -> Self {
        IndicatorSpec {
            class,
            ..self.clone()
        }
    }

    /// Conditional probability of the indicator at `t` given `ξ = x`.
    pub fn conditional_probability(&self, t: f64, x: f64) -> f64 {
        let g = self.transform.apply(x);
        match self.class {
            EventClass::Any => {
                if g <= t {
                    1.0
                } else {
                    self.censor.cdf(t)
                }
            }
            EventClass::Event => {
                if g <= t {
                    self.censor.sf(g)
                } else {
                    0.0
                }
            }
            EventClass::Censored => self.censor.cdf(t.min(g)),
        }
    }

    /// Points where the conditional probability may be non-smooth in `x`.
    fn breakpoints(&self, t: f64) -> Vec<f64> {
        let mut out = self.transform.level_crossings(t);
        if self.class != EventClass::Any {
            for knot in self.censor.knots() {
                if knot < t {
                    out.extend(self.transform.level_crossings(knot));
                }
            }
        }
        out
    }
}

/// Projections of one indicator onto the Hermite basis at a fixed `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermiteProjection {
    pub t: f64,
    /// `E[p(ξ)]`, the probability of the indicator.
    pub mean: f64,
    /// `E[p(ξ) h_k(ξ)] / sqrt(k!)` for `k = 1..=k_max`.
    pub normalized: Vec<f64>,
}

impl HermiteProjection {
    pub fn k_max(&self) -> usize {
        self.normalized.len()
    }

    /// `η_k(t)`, `k ≥ 1`.
    pub fn eta(&self, k: usize) -> f64 {
        self.normalized[k - 1] * factorial(k).sqrt()
    }

    pub fn etas(&self) -> Vec<f64> {
        (1..=self.k_max()).map(|k| self.eta(k)).collect()
    }

    /// `Σ_{k ≤ k_max} η_k² / k!`.
    pub fn parseval_partial_sum(&self) -> f64 {
        self.normalized.iter().map(|c| c * c).sum()
    }

    /// Variance of the indicator, the limit of the Parseval sum.
    pub fn indicator_variance(&self) -> f64 {
        self.mean * (1.0 - self.mean)
    }

    /// Smallest `k` with `|η_k| > tol`.
    pub fn rank(&self, tol: f64) -> Option<usize> {
        (1..=self.k_max()).find(|&k| self.eta(k).abs() > tol)
    }
}

const COARSE_NODES: usize = 20;
const FINE_NODES: usize = 40;
const PANEL_WIDTH: f64 = 0.5;
/// Largest accepted coarse/fine disagreement, on the `h_k / sqrt(k!)` scale.
pub const NODE_TOLERANCE: f64 = 1e-8;

fn truncation_radius(k_max: usize) -> f64 {
    10.0 + 2.0 * (k_max as f64).sqrt()
}

fn panels(breaks: &[f64], radius: f64) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| b.is_finite() && b.abs() < radius)
        .collect();
    cuts.push(-radius);
    cuts.push(radius);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let pieces = ((b - a) / PANEL_WIDTH).ceil().max(1.0) as usize;
        let step = (b - a) / pieces as f64;
        for i in 0..pieces {
            let lo = a + step * i as f64;
            let hi = if i + 1 == pieces { b } else { lo + step };
            out.push((lo, hi));
        }
    }
    out
}

fn project_with(
    spec: &IndicatorSpec,
    t: f64,
    k_max: usize,
    rule: &GaussLegendre,
    cells: &[(f64, f64)],
) -> (f64, Vec<f64>) {
    let mut acc = vec![0.0; k_max + 1];
    for &(a, b) in cells {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (&z, &w) in rule.nodes.iter().zip(&rule.weights) {
            let x = mid + half * z;
            let weight = half * w * std_normal_pdf(x) * spec.conditional_probability(t, x);
            if weight == 0.0 {
                continue;
            }
            for (slot, psi) in acc.iter_mut().zip(normalized_hermite_values(k_max, x)) {
                *slot += weight * psi;
            }
        }
    }
    let mean = acc[0];
    acc.remove(0);
    (mean, acc)
}

/// Hermite projections of the indicator at `t` up to order `k_max`, with a
/// node-doubling convergence check.
pub fn hermite_projection(spec: &IndicatorSpec, t: f64, k_max: usize) -> Result<HermiteProjection> {
    if k_max == 0 {
        return Err(Error::InvalidParameter("k_max must be at least 1".into()));
    }
    let cells = panels(&spec.breakpoints(t), truncation_radius(k_max));
    let coarse = project_with(spec, t, k_max, &GaussLegendre::new(COARSE_NODES), &cells);
    let fine = project_with(spec, t, k_max, &GaussLegendre::new(FINE_NODES), &cells);
    let diff = std::iter::once((coarse.0, fine.0))
        .chain(coarse.1.iter().copied().zip(fine.1.iter().copied()))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if !(diff <= NODE_TOLERANCE) {
        return Err(Error::QuadratureNonConvergence { diff });
    }
    Ok(HermiteProjection {
        t,
        mean: fine.0,
        normalized: fine.1,
    })
}

/// `η_k(t)` for a single order `k ≥ 1`.
pub fn hermite_coefficient(k: usize, t: f64, spec: &IndicatorSpec) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "coefficient order must be at least 1".into(),
        ));
    }
    Ok(hermite_projection(spec, t, k)?.eta(k))
}

/// `η_k(t)` in closed form for the uncensored-or-censored "any" family with
/// increasing `g`: `-(1 - G(t)) φ(c) h_{k-1}(c)`, `c = g⁻¹(t)`.
pub fn monotone_any_coefficient(k: usize, t: f64, transform: &Transform, censor: &Marginal) -> f64 {
    let c = match transform.level_crossings(t).first() {
        Some(&c) => c,
        None => return 0.0,
    };
    -censor.sf(t) * std_normal_pdf(c) * hermite_poly(k - 1, c)
}

/// `n` evenly spaced points between the 0.01 and 0.99 quantiles of a law.
pub fn default_rank_grid(law: &Marginal, n: usize) -> Vec<f64> {
    let lo = law.quantile(0.01);
    let hi = law.quantile(0.99);
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

pub const DEFAULT_RANK_TOL: f64 = 1e-6;
pub const DEFAULT_GRID_POINTS: usize = 64;

/// Coefficient matrix of one indicator family over a grid, and its rank.
#[derive(Clone, Debug, PartialEq)]
pub struct HermiteExpansion {
    pub family: EventClass,
    pub grid: Vec<f64>,
    pub k_max: usize,
    pub tol: f64,
    pub projections: Vec<HermiteProjection>,
    /// `None` where no coefficient up to `k_max` exceeds `tol`.
    pub rank_per_t: Vec<Option<usize>>,
    pub rank: usize,
}

impl HermiteExpansion {
    pub fn compute(spec: &IndicatorSpec, grid: &[f64], k_max: usize, tol: f64) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::InvalidParameter("empty t grid".into()));
        }
        let projections: Vec<HermiteProjection> = grid
            .par_iter()
            .map(|&t| hermite_projection(spec, t, k_max))
            .collect::<Result<_>>()?;
        let rank_per_t: Vec<Option<usize>> = projections.iter().map(|p| p.rank(tol)).collect();
        let rank = rank_per_t
            .iter()
            .flatten()
            .copied()
            .min()
            .ok_or(Error::RankUndetectable { k_max, tol })?;
        Ok(HermiteExpansion {
            family: spec.class,
            grid: grid.to_vec(),
            k_max,
            tol,
            projections,
            rank_per_t,
            rank,
        })
    }

    pub fn eta(&self, k: usize, j: usize) -> f64 {
        self.projections[j].eta(k)
    }

    /// Rows `(t, k, eta_k)`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "k", "eta_k"])?;
        for p in &self.projections {
            for k in 1..=self.k_max {
                w.write_record([format!("{}", p.t), k.to_string(), format!("{:e}", p.eta(k))])?;
            }
        }
        w.flush().map_err(|source| Error::Io {
            path: "<csv>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Ranks of the three indicator families of a censored model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub rank: usize,
    /// Rank of the censored family, `None` when it vanishes (no censoring).
    pub r0: Option<usize>,
    pub r1: usize,
    pub tol: f64,
    pub k_max: usize,
}

/// Expansions for all three families of a model over one grid.
#[derive(Clone, Debug)]
pub struct ModelExpansion {
    pub any: HermiteExpansion,
    pub event: HermiteExpansion,
    pub censored: Option<HermiteExpansion>,
    pub summary: RankSummary,
}

pub fn hermite_rank(
    spec: &IndicatorSpec,
    grid: &[f64],
    k_max: usize,
    tol: f64,
) -> Result<ModelExpansion> {
    let any = HermiteExpansion::compute(&spec.with_class(EventClass::Any), grid, k_max, tol)?;
    let event = HermiteExpansion::compute(&spec.with_class(EventClass::Event), grid, k_max, tol)?;
    let censored = if spec.censor.is_never() {
        None
    } else {
        Some(HermiteExpansion::compute(
            &spec.with_class(EventClass::Censored),
            grid,
            k_max,
            tol,
        )?)
    };
    let summary = RankSummary {
        rank: any.rank,
        r0: censored.as_ref().map(|c| c.rank),
        r1: event.rank,
        tol,
        k_max,
    };
    Ok(ModelExpansion {
        any,
        event,
        censored,
        summary,
    })
}

/// `Var(Σ_{i ≤ n} h_r(ξ_i)) = r! Σ_{|k| < n} (n - |k|) cov(k)^r`.
pub fn sigma_n_squared<C: Fn(usize) -> f64>(cov: C, r: usize, n: usize) -> f64 {
    let r_i = r as i32;
    let mut total = n as f64 * cov(0).powi(r_i);
    for k in 1..n {
        total += 2.0 * (n - k) as f64 * cov(k).powi(r_i);
    }
    factorial(r) * total
}

/// `l₁(n) = 2 l₀(n)^r / (r! (1 - rd)(2 - rd))`.
pub fn l1_constant(n: usize, d: f64, r: usize, l0: &SlowlyVarying) -> Result<f64> {
    let rd = r as f64 * d;
    if !(d > 0.0 && rd < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < d < 1/r, got d = {d}, r = {r}"
        )));
    }
    Ok(2.0 * l0.at(n as f64, d).powi(r as i32) / (factorial(r) * (1.0 - rd) * (2.0 - rd)))
}

/// Normalising sequence `a_n` of the deviations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum RateSpec {
    /// `a_n = (σ²/n)^{1/2}`.
    Weak { sigma2: f64 },
    /// `a_n = σ_n / n` with the exact `σ_n`.
    Lrd { d: f64, l0: SlowlyVarying, r: usize },
}

impl RateSpec {
    pub fn rate(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::EmptySample);
        }
        match self {
            RateSpec::Weak { sigma2 } => {
                if !(*sigma2 > 0.0 && sigma2.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "sigma2 = {sigma2} must be positive"
                    )));
                }
                Ok((sigma2 / n as f64).sqrt())
            }
            RateSpec::Lrd { d, l0, r } => {
                if *r == 0 || *d * *r as f64 >= 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "need 0 < d < 1/r, got d = {d}, r = {r}"
                    )));
                }
                let cov = LrdCovariance::new(*d, l0.clone())?;
                Ok(rate_from_covariance(|k| cov.at(k), *r, n))
            }
        }
    }
}

/// `σ_n / n` for an arbitrary driver covariance.
pub fn rate_from_covariance<C: Fn(usize) -> f64>(cov: C, r: usize, n: usize) -> f64 {
    sigma_n_squared(cov, r, n).sqrt() / n as f64
}

/// The two asymptotic forms a long range dependent rate may be read as:
/// `n^{-rd/2} l₁(n)` and `n^{-rd/2} l₁(n)^{1/2}`; the exact `σ_n/n` follows the
/// second up to the factor `r!`.
pub fn asymptotic_rate_forms(n: usize, d: f64, r: usize, l0: &SlowlyVarying) -> Result<(f64, f64)> {
    let l1 = l1_constant(n, d, r, l0)?;
    let base = (n as f64).powf(-(r as f64) * d / 2.0);
    Ok((base * l1, base * l1.sqrt()))
}

/// Least-squares slope of `log y` on `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
