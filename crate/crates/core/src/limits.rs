//! Limit processes of the normalised Nelson-Aalen and Kaplan-Meier deviations.
//!
//! Weakly dependent data: the deviation of `Λ_n` converges to
//! `∫_0^t dw¹/(1 - H) + ∫_0^t w dH¹/(1 - H)²` where `(w, w¹)` is the limit of
//! the empirical processes of `H_n` and `H¹_n`, both driven by one Brownian
//! bridge. Long range dependent data: the limit is `ζ_r(t) Z / r!` for one
//! random variable `Z`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depgen::{CirculantEmbedding, DependenceModel, LrdCovariance, SlowlyVarying};
use crate::error::{Error, Result};
use crate::estimators::TrueModel;
use crate::hermite::{
    factorial, hermite_poly, hermite_projection, hermite_rank, sigma_n_squared, EventClass,
    IndicatorSpec, RankSummary,
};
use crate::marginal::Marginal;
use crate::quadrature::adaptive_simpson;
use crate::rng::{Purpose, RngStream};

/// Grids must stay where `H(t) ≤ MAX_H`, away from the `(1 - H)⁻²` blow-up.
pub const MAX_H: f64 = 0.95;
pub const DEFAULT_SUBGRID: usize = 8192;
pub const DEFAULT_ZETA_SUBGRID: usize = 1024;
pub const DEFAULT_SURROGATE_LEN: usize = 1 << 16;

/// Brownian bridge at increasing points of `[0, 1]`, by sampling each value
/// conditionally on the previous one and on `B(1) = 0`.
pub fn simulate_brownian_bridge<R: Rng + ?Sized>(grid_u: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(grid_u.len());
    let (mut prev_u, mut prev_b) = (0.0f64, 0.0f64);
    for &u in grid_u {
        if !(0.0..=1.0).contains(&u) || u < prev_u {
            return Err(Error::InvalidParameter(format!(
                "bridge grid must be increasing in [0, 1], got {u} after {prev_u}"
            )));
        }
        let z: f64 = rng.sample(StandardNormal);
        let b = if u >= 1.0 {
            0.0
        } else {
            let rest = 1.0 - prev_u;
            let mean = prev_b * (1.0 - u) / rest;
            let var = (u - prev_u) * (1.0 - u) / rest;
            mean + var.sqrt() * z
        };
        out.push(b);
        prev_u = u;
        prev_b = b;
    }
    Ok(out)
}

/// How one bridge is shared between `w` (limit of `H_n`) and `w¹` (of `H¹_n`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// `w¹ = B(H¹)`, `w = B(H¹) + B(p + H⁰) - B(p)` with `p = H¹(∞)`: events
    /// fill `[0, p]` and censorings `[p, 1]` of the bridge's time axis. This
    /// is the exact joint law of the i.i.d. empirical processes.
    #[default]
    Split,
    /// `w = B(H)`, `w¹ = B(H¹)` read off the displayed formula; its variance
    /// exceeds the classical one.
    Literal,
}

fn check_grid(model: &TrueModel, t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::InvalidParameter("empty t grid".into()));
    }
    let mut prev = f64::NEG_INFINITY;
    for &t in t_grid {
        if !(t.is_finite() && t >= 0.0 && t > prev) {
            return Err(Error::InvalidParameter(format!(
                "t grid must be finite, nonnegative and strictly increasing (at {t})"
            )));
        }
        let h = model.h(t);
        if h > MAX_H {
            return Err(Error::GridOutOfRange { t, h });
        }
        prev = t;
    }
    Ok(())
}

/// Points `0 = u_0 < … < u_m = max(t_grid)`, evenly spaced in `H`, merged with
/// the grid. Returns the points and the position of each grid time.
fn integration_subgrid(model: &TrueModel, t_grid: &[f64], m: usize) -> (Vec<f64>, Vec<usize>) {
    let t_max = *t_grid.last().expect("checked nonempty");
    let h_max = model.h(t_max);
    let mut sub: Vec<f64> = vec![0.0];
    if t_max > 0.0 {
        for i in 1..m {
            let u = model.h_quantile(h_max * i as f64 / m as f64);
            if u > 0.0 && u < t_max {
                sub.push(u);
            }
        }
    }
    sub.extend_from_slice(t_grid);
    sub.sort_by(f64::total_cmp);
    sub.dedup();
    let index = t_grid
        .iter()
        .map(|t| sub.partition_point(|&u| u < *t))
        .collect();
    (sub, index)
}

/// Discretised weak limit for one model and grid; reusable across paths.
#[derive(Clone, Debug)]
pub struct WeakLimitSimulator {
    t_grid: Vec<f64>,
    coupling: Coupling,
    sub: Vec<f64>,
    t_index: Vec<usize>,
    /// `1/(1 - H)` at the subgrid points and at midpoints.
    a: Vec<f64>,
    a_mid: Vec<f64>,
    h1: Vec<f64>,
    survival: Vec<f64>,
    /// Bridge time points, increasing.
    bridge_points: Vec<f64>,
    /// Per subgrid point: bridge index of `H¹(u)` and of the second point.
    idx_event: Vec<usize>,
    idx_second: Vec<usize>,
    idx_p: usize,
}

impl WeakLimitSimulator {
    pub fn new(
        model: &TrueModel,
        t_grid: &[f64],
        subgrid: usize,
        coupling: Coupling,
    ) -> Result<Self> {
        check_grid(model, t_grid)?;
        if subgrid < 2 {
            return Err(Error::InvalidParameter(
                "subgrid needs at least 2 points".into(),
            ));
        }
        let (sub, t_index) = integration_subgrid(model, t_grid, subgrid);
        let a: Vec<f64> = sub.iter().map(|&u| 1.0 / model.h_sf(u)).collect();
        let a_mid: Vec<f64> = sub
            .windows(2)
            .map(|w| 1.0 / model.h_sf(0.5 * (w[0] + w[1])))
            .collect();
        let h1 = model.h1_on_grid(&sub);
        let p = model.event_probability();
        let second: Vec<f64> = sub
            .iter()
            .zip(&h1)
            .map(|(&u, &e)| match coupling {
                Coupling::Split => (p + (model.h(u) - e).max(0.0)).min(1.0),
                Coupling::Literal => model.h(u),
            })
            .collect();
        let mut bridge_points: Vec<f64> = h1.iter().chain(&second).copied().collect();
        bridge_points.push(p);
        bridge_points.sort_by(f64::total_cmp);
        bridge_points.dedup();
        let find = |v: f64| bridge_points.partition_point(|&b| b < v);
        let idx_event = h1.iter().map(|&v| find(v)).collect();
        let idx_second = second.iter().map(|&v| find(v)).collect();
        let idx_p = find(p);
        Ok(WeakLimitSimulator {
            t_grid: t_grid.to_vec(),
            coupling,
            survival: t_grid.iter().map(|&t| model.survival(t)).collect(),
            sub,
            t_index,
            a,
            a_mid,
            h1,
            bridge_points,
            idx_event,
            idx_second,
            idx_p,
        })
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn coupling(&self) -> Coupling {
        self.coupling
    }

    pub fn subgrid_len(&self) -> usize {
        self.sub.len()
    }

    pub fn bridge_points(&self) -> &[f64] {
        &self.bridge_points
    }

    fn w_values(&self, bridge: &[f64], i: usize) -> (f64, f64) {
        let w1 = bridge[self.idx_event[i]];
        let w = match self.coupling {
            Coupling::Split => w1 + bridge[self.idx_second[i]] - bridge[self.idx_p],
            Coupling::Literal => bridge[self.idx_second[i]],
        };
        (w, w1)
    }

    /// `(na, km)` on the grid for bridge values at [`Self::bridge_points`].
    pub fn paths_from_bridge(&self, bridge: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut at_sub = Vec::with_capacity(self.sub.len());
        let mut acc = 0.0;
        at_sub.push(0.0);
        let (mut w_prev, mut w1_prev) = self.w_values(bridge, 0);
        for i in 0..self.sub.len() - 1 {
            let (w, w1) = self.w_values(bridge, i + 1);
            acc += self.a_mid[i] * (w1 - w1_prev);
            let f0 = w_prev * self.a[i] * self.a[i];
            let f1 = w * self.a[i + 1] * self.a[i + 1];
            acc += 0.5 * (f0 + f1) * (self.h1[i + 1] - self.h1[i]);
            at_sub.push(acc);
            w_prev = w;
            w1_prev = w1;
        }
        let na: Vec<f64> = self.t_index.iter().map(|&j| at_sub[j]).collect();
        let km = na.iter().zip(&self.survival).map(|(v, s)| v * s).collect();
        (na, km)
    }

    pub fn simulate<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let bridge =
            simulate_brownian_bridge(&self.bridge_points, rng).expect("points lie in [0, 1]");
        self.paths_from_bridge(&bridge)
    }

    /// Exact variance of the discretised Nelson-Aalen limit at each grid time.
    pub fn variances(&self) -> Vec<f64> {
        (0..self.t_grid.len())
            .map(|j| self.variance_at(j))
            .collect()
    }

    fn variance_at(&self, j: usize) -> f64 {
        // the path is Σ c_k B(v_k); Var = ∫ (Σ_{v_k ≥ s} c_k)² ds - (Σ c_k v_k)²
        let mut c = vec![0.0; self.bridge_points.len()];
        let last = self.t_index[j];
        let add_w = |c: &mut Vec<f64>, i: usize, coef: f64, event_only: bool| {
            c[self.idx_event[i]] += coef;
            if !event_only {
                match self.coupling {
                    Coupling::Split => {
                        c[self.idx_second[i]] += coef;
                        c[self.idx_p] -= coef;
                    }
                    Coupling::Literal => {
                        c[self.idx_event[i]] -= coef;
                        c[self.idx_second[i]] += coef;
                    }
                }
            }
        };
        for i in 0..last {
            add_w(&mut c, i + 1, self.a_mid[i], true);
            add_w(&mut c, i, -self.a_mid[i], true);
            let dh = 0.5 * (self.h1[i + 1] - self.h1[i]);
            add_w(&mut c, i, dh * self.a[i] * self.a[i], false);
            add_w(&mut c, i + 1, dh * self.a[i + 1] * self.a[i + 1], false);
        }
        let mean_term: f64 = c.iter().zip(&self.bridge_points).map(|(a, v)| a * v).sum();
        let mut tail = 0.0;
        let mut integral = 0.0;
        for k in (0..c.len()).rev() {
            tail += c[k];
            let lower = if k == 0 {
                0.0
            } else {
                self.bridge_points[k - 1]
            };
            integral += tail * tail * (self.bridge_points[k] - lower);
        }
        integral - mean_term * mean_term
    }
}

/// One draw of the weak limit on `t_grid` with default discretisation.
pub fn simulate_weak_limit<R: Rng + ?Sized>(
    model: &TrueModel,
    t_grid: &[f64],
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let sim = WeakLimitSimulator::new(model, t_grid, DEFAULT_SUBGRID, Coupling::Split)?;
    Ok(sim.simulate(rng))
}

/// `∫_0^t dH¹/(1 - H)²`, the variance of the weak Nelson-Aalen limit.
pub fn weak_limit_variance(model: &TrueModel, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    // in the scale p = F(u): dH¹/(1-H)² = dp / ((1-p)² (1-G(F⁻¹(p))))
    let law = model.lifetime();
    let censor = model.censor();
    let pt = law.cdf(t);
    let mut cuts = vec![0.0];
    for k in censor.knots() {
        let pk = law.cdf(k);
        if pk > 0.0 && pk < pt {
            cuts.push(pk);
        }
    }
    cuts.push(pt);
    let f = |p: f64| 1.0 / ((1.0 - p) * (1.0 - p) * censor.sf(law.quantile(p)));
    cuts.windows(2)
        .map(|w| adaptive_simpson(&f, w[0], w[1], 1e-12))
        .sum()
}

/// The deterministic shape `ζ_r` of the long range dependent limit, in both
/// forms: with `dH` in the first integral as displayed, and with `dH¹` as
/// obtained by inserting the degenerate limits into the general expansion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZetaForms {
    pub grid: Vec<f64>,
    pub literal: Vec<f64>,
    pub substitution: Vec<f64>,
    pub r: usize,
    pub r0: Option<usize>,
    pub r1: usize,
    /// Whether the event family contributes (`r0 ≥ r1`).
    pub events_contribute: bool,
    pub subgrid: usize,
}

impl ZetaForms {
    pub fn sup_discrepancy(&self) -> f64 {
        self.literal
            .iter()
            .zip(&self.substitution)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `ζ_r` on `t_grid` from the coefficient functions `η_{r,0}`, `η_{r,1}`.
/// `r0 = None` means the censored family is absent.
#[allow(clippy::too_many_arguments)]
pub fn zeta_r<E0, E1>(
    model: &TrueModel,
    eta_r0: E0,
    eta_r1: E1,
    r0: Option<usize>,
    r1: usize,
    t_grid: &[f64],
    subgrid: usize,
) -> Result<ZetaForms>
where
    E0: Fn(f64) -> f64 + Sync,
    E1: Fn(f64) -> f64 + Sync,
{
    check_grid(model, t_grid)?;
    let events_contribute = r0.is_none_or(|r0| r0 >= r1);
    let r = r0.map_or(r1, |r0| r0.min(r1));
    let (sub, t_index) = integration_subgrid(model, t_grid, subgrid.max(2));
    let etas: Vec<(f64, f64)> = sub
        .par_iter()
        .map(|&u| {
            if u == 0.0 {
                (0.0, 0.0)
            } else {
                (eta_r0(u), eta_r1(u))
            }
        })
        .collect();
    let eta_r: Vec<f64> = etas
        .iter()
        .map(|&(e0, e1)| if events_contribute { e0 + e1 } else { e0 })
        .collect();
    let h: Vec<f64> = sub.iter().map(|&u| model.h(u)).collect();
    let h1 = model.h1_on_grid(&sub);
    let a: Vec<f64> = sub.iter().map(|&u| 1.0 / model.h_sf(u)).collect();

    let (mut lit, mut subst) = (vec![0.0; sub.len()], vec![0.0; sub.len()]);
    let (mut acc_l, mut acc_s) = (0.0, 0.0);
    for i in 0..sub.len() - 1 {
        let f0 = eta_r[i] * a[i] * a[i];
        let f1 = eta_r[i + 1] * a[i + 1] * a[i + 1];
        let mean = 0.5 * (f0 + f1);
        let mut common = 0.0;
        if events_contribute {
            let a_mid = 1.0 / model.h_sf(0.5 * (sub[i] + sub[i + 1]));
            common = a_mid * (etas[i + 1].1 - etas[i].1);
        }
        acc_l += mean * (h[i + 1] - h[i]) + common;
        acc_s += mean * (h1[i + 1] - h1[i]) + common;
        lit[i + 1] = acc_l;
        subst[i + 1] = acc_s;
    }
    Ok(ZetaForms {
        grid: t_grid.to_vec(),
        literal: t_index.iter().map(|&j| lit[j]).collect(),
        substitution: t_index.iter().map(|&j| subst[j]).collect(),
        r,
        r0,
        r1,
        events_contribute,
        subgrid,
    })
}

/// Ranks of the model's indicator families and the resulting `ζ_r`.
pub fn zeta_for_model(
    model: &DependenceModel,
    t_grid: &[f64],
    rank_grid: &[f64],
    k_max: usize,
    tol: f64,
    subgrid: usize,
) -> Result<(ZetaForms, RankSummary)> {
    let truth = model.true_model()?;
    let spec = IndicatorSpec::from_model(model, EventClass::Any);
    let ranks = hermite_rank(&spec, rank_grid, k_max, tol)?.summary;
    let r = ranks.r0.map_or(ranks.r1, |r0| r0.min(ranks.r1));
    let event = spec.with_class(EventClass::Event);
    let censored = spec.with_class(EventClass::Censored);
    let has_censoring = ranks.r0.is_some();
    let eta = |s: &IndicatorSpec, u: f64| {
        hermite_projection(s, u, r)
            .map(|p| p.eta(r))
            .unwrap_or(f64::NAN)
    };
    let zeta = zeta_r(
        &truth,
        |u| {
            if has_censoring {
                eta(&censored, u)
            } else {
                0.0
            }
        },
        |u| eta(&event, u),
        ranks.r0,
        ranks.r1,
        t_grid,
        subgrid,
    )?;
    if zeta
        .literal
        .iter()
        .chain(&zeta.substitution)
        .any(|v| !v.is_finite())
    {
        return Err(Error::QuadratureNonConvergence { diff: f64::NAN });
    }
    Ok((zeta, ranks))
}

/// Sampler for the random factor `z_r` of the long range dependent limit.
#[derive(Clone, Debug)]
pub enum HermiteVariable {
    /// `z_1 ~ N(0, 1)`.
    Gaussian,
    /// `σ_m⁻¹ Σ_{i ≤ m} h_r(ξ_i)` for a driver of length `m`, standing in
    /// for the non-Gaussian limit when `r ≥ 2`.
    Surrogate {
        r: usize,
        embedding: CirculantEmbedding,
        sigma_m: f64,
    },
}

impl HermiteVariable {
    pub fn new(r: usize, d: f64, l0: &SlowlyVarying, surrogate_len: usize) -> Result<Self> {
        if r == 0 || !(d > 0.0 && d * (r as f64) < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < d < 1/r, got d = {d}, r = {r}"
            )));
        }
        if r == 1 {
            return Ok(HermiteVariable::Gaussian);
        }
        let cov = LrdCovariance::new(d, l0.clone())?;
        let embedding = CirculantEmbedding::new(|k| cov.at(k), surrogate_len)?;
        let sigma_m = sigma_n_squared(|k| cov.at(k), r, surrogate_len).sqrt();
        Ok(HermiteVariable::Surrogate {
            r,
            embedding,
            sigma_m,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            HermiteVariable::Gaussian => rng.sample(StandardNormal),
            HermiteVariable::Surrogate {
                r,
                embedding,
                sigma_m,
            } => {
                let xi = embedding.sample(rng);
                xi.iter().map(|&x| hermite_poly(*r, x)).sum::<f64>() / sigma_m
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitMetadata {
    pub regime: String,
    pub quantity: String,
    pub lifetime: Marginal,
    pub censor: Marginal,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Coupling>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subgrid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surrogate_len: Option<usize>,
    pub seed: u64,
    pub replications: usize,
}

/// Replications of a limit process on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitSample {
    pub grid: Vec<f64>,
    /// `paths[replication][grid index]`.
    pub paths: Vec<Vec<f64>>,
    pub metadata: LimitMetadata,
}

impl LimitSample {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p[j]).collect()
    }

    /// Rows `(replication, t, value)`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["replication", "t", "value"])?;
        for (rep, path) in self.paths.iter().enumerate() {
            for (t, v) in self.grid.iter().zip(path) {
                w.write_record([rep.to_string(), t.to_string(), format!("{v:e}")])?;
            }
        }
        w.flush().map_err(|source| Error::Io {
            path: "<csv>".into(),
            source,
        })?;
        Ok(())
    }

    pub fn metadata_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.metadata)?)
    }
}

/// Weak-limit replications for the Nelson-Aalen and Kaplan-Meier deviations;
/// replication `r` uses stream `(seed, r)`.
pub fn weak_limit_sample(
    model: &TrueModel,
    sim: &WeakLimitSimulator,
    replications: usize,
    seed: u64,
) -> (LimitSample, LimitSample) {
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = RngStream::new(seed, rep as u64)
                .for_purpose(Purpose::Limit)
                .rng();
            sim.simulate(&mut rng)
        })
        .collect();
    let meta = |quantity: &str| LimitMetadata {
        regime: "weak".into(),
        quantity: quantity.into(),
        lifetime: model.lifetime().clone(),
        censor: model.censor().clone(),
        coupling: Some(sim.coupling()),
        subgrid: Some(sim.subgrid_len()),
        d: None,
        r: None,
        surrogate_len: None,
        seed,
        replications,
    };
    let (na, km): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    (
        LimitSample {
            grid: sim.t_grid().to_vec(),
            paths: na,
            metadata: meta("nelson_aalen"),
        },
        LimitSample {
            grid: sim.t_grid().to_vec(),
            paths: km,
            metadata: meta("kaplan_meier"),
        },
    )
}

/// Paths `ζ_r(t) Z / r!`, one `Z` per replication.
#[allow(clippy::too_many_arguments)]
pub fn simulate_lrd_limit(
    zeta: &[f64],
    r: usize,
    model: &DependenceModel,
    t_grid: &[f64],
    replications: usize,
    seed: u64,
    surrogate_len: usize,
) -> Result<LimitSample> {
    let (d, l0) = match &model.dependence {
        crate::depgen::Dependence::Lrd { d, l0 } => (*d, l0.clone()),
        _ => {
            return Err(Error::InvalidParameter(
                "long range dependent limit needs an lrd model".into(),
            ))
        }
    };
    if zeta.len() != t_grid.len() {
        return Err(Error::InvalidParameter(
            "zeta and grid lengths differ".into(),
        ));
    }
    let var = HermiteVariable::new(r, d, &l0, surrogate_len)?;
    let scale = 1.0 / factorial(r);
    let paths: Vec<Vec<f64>> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = RngStream::new(seed, rep as u64)
                .for_purpose(Purpose::Limit)
                .rng();
            let z = var.sample(&mut rng);
            zeta.iter().map(|v| v * z * scale).collect()
        })
        .collect();
    Ok(LimitSample {
        grid: t_grid.to_vec(),
        paths,
        metadata: LimitMetadata {
            regime: "lrd".into(),
            quantity: "nelson_aalen".into(),
            lifetime: model.lifetime.clone(),
            censor: model.censor.clone(),
            coupling: None,
            subgrid: None,
            d: Some(d),
            r: Some(r),
            surrogate_len: (r >= 2).then_some(surrogate_len),
            seed,
            replications,
        },
    })
}
