//! The Monte Carlo experiment: simulate normalised deviations of the
//! estimators, simulate the limit, and compare the two.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depgen::{Dependence, DependenceModel, LrdCovariance, SampleGenerator};
use crate::error::{Error, Result};
use crate::estimators::{estimate, TrueModel};
use crate::hermite::{
    asymptotic_rate_forms, default_rank_grid, factorial, log_log_slope, sigma_n_squared,
    RankSummary, RateSpec,
};
use crate::limits::{
    simulate_lrd_limit, weak_limit_sample, weak_limit_variance, zeta_for_model, LimitMetadata,
    LimitSample, WeakLimitSimulator, ZetaForms,
};
use crate::rng::{Purpose, RngStream};

use super::config::{resolve_grid, ExperimentConfig, Regime, ResolvedGrid};
use super::degeneracy::{degeneracy_diagnostic, Degeneracy};
use super::ks::{ks_one_sample_normal, ks_two_sample, KsResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Settings that may change how a run executes but never what it computes.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses all cores.
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub regime: Regime,
    pub a_n: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    /// `n^{-rd/2} l₁(n)` and `n^{-rd/2} l₁(n)^{1/2}`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymptotic_forms: Option<[f64; 2]>,
    /// Slope of `log σ_m²` against `log m` for `m ∈ {n/16, …, n}`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_n_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub replications: usize,
    pub seed: u64,
    /// Per grid point: variance of `√n (Λ_n - Λ)` over the limit variance.
    pub ratios: Vec<f64>,
    /// Mean of the ratios, used as `σ²`.
    pub sigma2: f64,
    /// `n⁻¹ Var(t_1 + … + t_n)` over the pilot replications.
    pub observed_time_long_run_variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub t: f64,
    pub h: f64,
    pub mean_na: f64,
    pub sd_na: f64,
    /// `mean / (sd / √R)`.
    pub centering_z: f64,
    pub var_na: f64,
    pub var_km: f64,
    pub limit_var_na: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classical_var_na: Option<f64>,
    pub variance_ratio: f64,
    pub limit_sample_var_na: f64,
    pub ks_na: KsResult,
    pub ks_km: KsResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalityCheck {
    pub t: f64,
    /// `ζ_r(t) / r!`, the divisor of the deviations.
    pub scale: f64,
    pub ks: KsResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

fn verdict(name: String, statistic: f64, threshold: f64, pass: bool, detail: String) -> Verdict {
    Verdict {
        name,
        statistic,
        threshold,
        pass,
        detail,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub grid: ResolvedGrid,
    pub rate: RateReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Calibration>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranks: Option<RankSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta: Option<ZetaForms>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta_sup_discrepancy: Option<f64>,
    pub limit: LimitMetadata,
    pub points: Vec<GridPoint>,
    pub degeneracy: Degeneracy,
    pub mid_grid: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normality: Option<NormalityCheck>,
    /// Largest `|S_n(t) - ∏(1 - dΛ_n)(t)|` over replications and grid.
    pub max_product_integral_gap: f64,
    /// `na_dev[replication][grid index]`.
    pub na_dev: Vec<Vec<f64>>,
    pub km_dev: Vec<Vec<f64>>,
    pub verdicts: Vec<Verdict>,
    pub pass: bool,
    #[serde(skip)]
    pub limit_na: Vec<Vec<f64>>,
    #[serde(skip)]
    pub limit_km: Vec<Vec<f64>>,
}

struct Replicate {
    na: Vec<f64>,
    km: Vec<f64>,
    gap: f64,
    time_sum: f64,
}

/// Raw deviations `Λ_n(t) - Λ(t)`, `S_n(t) - S(t)` for one replication.
fn replicate(
    generator: &SampleGenerator,
    truth: &TrueModel,
    grid: &[f64],
    stream: RngStream,
) -> Result<Replicate> {
    let sample = generator
        .generate(&stream)
        .map_err(|e| Error::Replication {
            replication: stream.stream_id,
            seed: stream.seed,
            source: Box::new(e),
        })?;
    let (na, km) = estimate(&sample);
    let mut gap = 0.0f64;
    let mut na_dev = Vec::with_capacity(grid.len());
    let mut km_dev = Vec::with_capacity(grid.len());
    for &t in grid {
        let s = km.eval(t);
        gap = gap.max((s - na.product_integral(t)).abs());
        na_dev.push(na.eval(t) - truth.cumulative_hazard(t));
        km_dev.push(s - truth.survival(t));
    }
    let time_sum = sample.observations().iter().map(|o| o.time).sum();
    Ok(Replicate {
        na: na_dev,
        km: km_dev,
        gap,
        time_sum,
    })
}

fn replicate_all(
    generator: &SampleGenerator,
    truth: &TrueModel,
    grid: &[f64],
    seed: u64,
    count: usize,
) -> Result<Vec<Replicate>> {
    (0..count)
        .into_par_iter()
        .map(|r| replicate(generator, truth, grid, RngStream::new(seed, r as u64)))
        .collect()
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var)
}

fn column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j]).collect()
}

/// Indices whose `H`-level lies in `[0.2, 0.8]`, or all when fewer than two do.
fn mid_grid(h_levels: &[f64]) -> Vec<usize> {
    let mid: Vec<usize> = (0..h_levels.len())
        .filter(|&j| (0.2..=0.8).contains(&h_levels[j]))
        .collect();
    if mid.len() >= 2 {
        mid
    } else {
        (0..h_levels.len()).collect()
    }
}

fn calibrate(
    cfg: &ExperimentConfig,
    replications: usize,
    generator: &SampleGenerator,
    truth: &TrueModel,
    grid: &[f64],
    limit_var: &[f64],
) -> Result<Calibration> {
    let seed = RngStream::new(cfg.seed, 0)
        .for_purpose(Purpose::Calibration)
        .seed;
    let reps = replicate_all(generator, truth, grid, seed, replications)?;
    let root_n = (cfg.n as f64).sqrt();
    let ratios: Vec<f64> = (0..grid.len())
        .map(|j| {
            let col: Vec<f64> = reps.iter().map(|r| r.na[j] * root_n).collect();
            mean_var(&col).1 / limit_var[j]
        })
        .collect();
    let sigma2 = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let sums: Vec<f64> = reps.iter().map(|r| r.time_sum).collect();
    let observed_time_long_run_variance = mean_var(&sums).1 / cfg.n as f64;
    Ok(Calibration {
        replications,
        seed,
        ratios,
        sigma2,
        observed_time_long_run_variance,
    })
}

/// Run the experiment described by `cfg`.
pub fn run_fclt_experiment(
    cfg: &ExperimentConfig,
    options: RunOptions,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = options.threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(cfg))
}

fn run_inner(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let model: &DependenceModel = &cfg.model;
    let truth = model.true_model()?;
    let grid = resolve_grid(cfg)?;
    let times = grid.times.clone();
    let p = times.len();
    let reps_n = cfg.replications;
    let generator = SampleGenerator::new(model, cfg.n)?;
    let num = &cfg.numerics;

    // regime-specific normalisation and limit
    let mut calibration = None;
    let mut ranks = None;
    let mut zeta: Option<ZetaForms> = None;
    let rate: RateReport;
    let limit_na: LimitSample;
    let limit_km: LimitSample;
    let limit_var: Vec<f64>;
    let mut classical: Vec<Option<f64>> = vec![None; p];

    match cfg.regime {
        Regime::Weak => {
            let sim = WeakLimitSimulator::new(&truth, &times, num.subgrid, num.coupling)?;
            limit_var = sim.variances();
            if matches!(model.dependence, Dependence::Iid) {
                classical = times
                    .iter()
                    .map(|&t| Some(weak_limit_variance(&truth, t)))
                    .collect();
            }
            let mut sigma2 = cfg.sigma2;
            if let Some(spec) = &cfg.calibration {
                let c = calibrate(
                    cfg,
                    spec.replications,
                    &generator,
                    &truth,
                    &times,
                    &limit_var,
                )?;
                sigma2 = c.sigma2;
                calibration = Some(c);
            }
            let a_n = RateSpec::Weak { sigma2 }.rate(cfg.n)?;
            rate = RateReport {
                regime: Regime::Weak,
                a_n,
                sigma2: Some(sigma2),
                sigma_n: None,
                r: None,
                asymptotic_forms: None,
                sigma_n_slope: None,
                expected_slope: None,
            };
            let (na, km) = weak_limit_sample(&truth, &sim, reps_n, cfg.seed);
            limit_na = na;
            limit_km = km;
        }
        Regime::Lrd => {
            let (d, l0) = match &model.dependence {
                Dependence::Lrd { d, l0 } => (*d, l0.clone()),
                _ => unreachable!("validated"),
            };
            let rank_grid = default_rank_grid(&model.lifetime, num.rank_grid_points);
            let (z, rk) = zeta_for_model(
                model,
                &times,
                &rank_grid,
                num.k_max,
                num.rank_tol,
                num.zeta_subgrid,
            )?;
            let r = z.r;
            if d * r as f64 >= 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "need d < 1/r for the long range limit, got d = {d}, r = {r}"
                )));
            }
            let a_n = RateSpec::Lrd {
                d,
                l0: l0.clone(),
                r,
            }
            .rate(cfg.n)?;
            let cov = LrdCovariance::new(d, l0.clone())?;
            let ms: Vec<usize> = (0..5).map(|k| (cfg.n >> (4 - k)).max(1)).collect();
            let s2: Vec<f64> = ms
                .iter()
                .map(|&m| sigma_n_squared(|k| cov.at(k), r, m))
                .collect();
            let msf: Vec<f64> = ms.iter().map(|&m| m as f64).collect();
            let forms = asymptotic_rate_forms(cfg.n, d, r, &l0)?;
            rate = RateReport {
                regime: Regime::Lrd,
                a_n,
                sigma2: None,
                sigma_n: Some(a_n * cfg.n as f64),
                r: Some(r),
                asymptotic_forms: Some([forms.0, forms.1]),
                sigma_n_slope: Some(log_log_slope(&msf, &s2)),
                expected_slope: Some(2.0 - r as f64 * d),
            };
            let na = simulate_lrd_limit(
                &z.substitution,
                r,
                model,
                &times,
                reps_n,
                cfg.seed,
                num.surrogate_len,
            )?;
            let survival: Vec<f64> = times.iter().map(|&t| truth.survival(t)).collect();
            let km = LimitSample {
                grid: na.grid.clone(),
                paths: na
                    .paths
                    .iter()
                    .map(|p| p.iter().zip(&survival).map(|(v, s)| v * s).collect())
                    .collect(),
                metadata: LimitMetadata {
                    quantity: "kaplan_meier".into(),
                    ..na.metadata.clone()
                },
            };
            let scale = 1.0 / factorial(r);
            limit_var = z.substitution.iter().map(|v| (v * scale).powi(2)).collect();
            limit_na = na;
            limit_km = km;
            ranks = Some(rk);
            zeta = Some(z);
        }
    }

    // deviations
    let reps = replicate_all(&generator, &truth, &times, cfg.seed, reps_n)?;
    let inv_a = 1.0 / rate.a_n;
    let na_dev: Vec<Vec<f64>> = reps
        .iter()
        .map(|r| r.na.iter().map(|v| v * inv_a).collect())
        .collect();
    let km_dev: Vec<Vec<f64>> = reps
        .iter()
        .map(|r| r.km.iter().map(|v| v * inv_a).collect())
        .collect();
    let max_gap = reps.iter().map(|r| r.gap).fold(0.0, f64::max);

    let bonferroni = cfg.ks_alpha / p as f64;
    let mut points = Vec::with_capacity(p);
    let mut verdicts = Vec::new();
    for j in 0..p {
        let na_col = column(&na_dev, j);
        let km_col = column(&km_dev, j);
        let (mean_na, var_na) = mean_var(&na_col);
        let (_, var_km) = mean_var(&km_col);
        let lim_na_col = limit_na.column(j);
        let lim_km_col = limit_km.column(j);
        let sd_na = var_na.sqrt();
        let centering_z = if sd_na > 0.0 {
            mean_na / (sd_na / (reps_n as f64).sqrt())
        } else {
            0.0
        };
        let reference = classical[j].unwrap_or(limit_var[j]);
        let point = GridPoint {
            t: times[j],
            h: grid.h_levels[j],
            mean_na,
            sd_na,
            centering_z,
            var_na,
            var_km,
            limit_var_na: limit_var[j],
            classical_var_na: classical[j],
            variance_ratio: var_na / reference,
            limit_sample_var_na: mean_var(&lim_na_col).1,
            ks_na: ks_two_sample(&na_col, &lim_na_col, bonferroni)?,
            ks_km: ks_two_sample(&km_col, &lim_km_col, bonferroni)?,
        };
        let tag = format!("t={:.6} (H={:.3})", point.t, point.h);
        verdicts.push(verdict(
            format!("ks_nelson_aalen {tag}"),
            point.ks_na.statistic,
            point.ks_na.critical_value,
            point.ks_na.pass,
            format!("two-sample KS, alpha {} / {p} grid points", cfg.ks_alpha),
        ));
        verdicts.push(verdict(
            format!("ks_kaplan_meier {tag}"),
            point.ks_km.statistic,
            point.ks_km.critical_value,
            point.ks_km.pass,
            format!("two-sample KS, alpha {} / {p} grid points", cfg.ks_alpha),
        ));
        verdicts.push(verdict(
            format!("centering {tag}"),
            point.centering_z.abs(),
            num.centering_se,
            point.centering_z.abs() <= num.centering_se,
            String::new(),
        ));
        let checked_level = cfg.grid.times.is_some()
            || num
                .variance_levels
                .iter()
                .any(|q| (q - point.h).abs() < 1e-9);
        if point.classical_var_na.is_some() && checked_level {
            verdicts.push(verdict(
                format!("variance_ratio {tag}"),
                point.variance_ratio,
                num.variance_tolerance,
                (point.variance_ratio - 1.0).abs() <= num.variance_tolerance,
                "against the integral of dH1/(1-H)^2".into(),
            ));
        }
        points.push(point);
    }
    verdicts.push(verdict(
        "km_is_product_integral_of_na".into(),
        max_gap,
        1e-12,
        max_gap <= 1e-12,
        String::new(),
    ));

    let degeneracy = degeneracy_diagnostic(&na_dev)?;
    let mid = mid_grid(&grid.h_levels);
    let mut normality = None;
    let mut zeta_sup_discrepancy = None;
    if let (Some(z), Regime::Lrd) = (&zeta, cfg.regime) {
        zeta_sup_discrepancy = Some(z.sup_discrepancy());
        verdicts.push(verdict(
            "rank_one_score".into(),
            degeneracy.rank_one_score,
            num.min_rank_one_score,
            degeneracy.rank_one_score >= num.min_rank_one_score,
            "top eigenvalue share of the deviation covariance".into(),
        ));
        let min_corr = degeneracy.min_abs_correlation(&mid);
        verdicts.push(verdict(
            "mid_grid_abs_correlation".into(),
            min_corr,
            num.min_abs_correlation,
            min_corr >= num.min_abs_correlation,
            String::new(),
        ));
        if z.r == 1 {
            let j = (0..p)
                .min_by(|&a, &b| {
                    (grid.h_levels[a] - 0.5)
                        .abs()
                        .total_cmp(&(grid.h_levels[b] - 0.5).abs())
                })
                .expect("nonempty grid");
            let scale = z.substitution[j];
            let ratio: Vec<f64> = na_dev.iter().map(|row| row[j] / scale).collect();
            let ks = ks_one_sample_normal(&ratio, cfg.ks_alpha)?;
            verdicts.push(verdict(
                format!("normalised_deviation_is_standard_normal t={:.6}", times[j]),
                ks.statistic,
                ks.critical_value,
                ks.pass,
                "one-sample KS of the deviation over zeta".into(),
            ));
            normality = Some(NormalityCheck {
                t: times[j],
                scale,
                ks,
            });
        }
    }

    let pass = verdicts.iter().all(|v| v.pass);
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        grid,
        rate,
        calibration,
        ranks,
        zeta,
        zeta_sup_discrepancy,
        limit: limit_na.metadata.clone(),
        points,
        degeneracy,
        mid_grid: mid,
        normality,
        max_product_integral_gap: max_gap,
        na_dev,
        km_dev,
        verdicts,
        pass,
        limit_na: limit_na.paths,
        limit_km: limit_km.paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn smoke(dependence: &str, regime: &str) -> ExperimentConfig {
        let text = format!(
            r#"
            n = 50
            replications = 100
            regime = "{regime}"
            seed = 3
            [model]
            lifetime = {{ family = "exponential", rate = 1.0 }}
            censor = {{ family = "exponential", rate = 0.5 }}
            dependence = {dependence}
            [numerics]
            subgrid = 256
            zeta_subgrid = 128
            rank_grid_points = 8
            k_max = 3
            "#
        );
        ExperimentConfig::from_toml_str(&text, Path::new("smoke.toml")).unwrap()
    }

    fn all_finite(r: &ExperimentReport) -> bool {
        r.points.iter().all(|p| {
            [
                p.mean_na,
                p.var_na,
                p.var_km,
                p.limit_var_na,
                p.ks_na.statistic,
                p.ks_km.statistic,
            ]
            .iter()
            .all(|v| v.is_finite())
        }) && r.degeneracy.rank_one_score.is_finite()
    }

    #[test]
    fn smoke_runs_in_every_regime() {
        for (dep, regime) in [
            (r#"{ variant = "iid" }"#, "weak"),
            (r#"{ variant = "mixing_ar", rho = 0.5 }"#, "weak"),
            (r#"{ variant = "lrd", d = 0.2 }"#, "lrd"),
        ] {
            let r = run_fclt_experiment(&smoke(dep, regime), RunOptions::default()).unwrap();
            assert!(all_finite(&r), "{dep}");
            assert_eq!(r.na_dev.len(), 100);
            assert_eq!(r.max_product_integral_gap, 0.0);
        }
    }

    #[test]
    fn calibration_is_recorded() {
        let mut cfg = smoke(r#"{ variant = "mixing_ar", rho = 0.5 }"#, "weak");
        cfg.calibration = Some(super::super::config::CalibrationSpec { replications: 100 });
        let r = run_fclt_experiment(&cfg, RunOptions::default()).unwrap();
        let c = r.calibration.unwrap();
        assert_eq!(c.ratios.len(), r.points.len());
        assert_eq!(r.rate.sigma2, Some(c.sigma2));
        assert!(c.sigma2 > 1.0);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let cfg = smoke(r#"{ variant = "lrd", d = 0.3 }"#, "lrd");
        let a = run_fclt_experiment(&cfg, RunOptions { threads: Some(1) }).unwrap();
        let b = run_fclt_experiment(&cfg, RunOptions { threads: Some(4) }).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
