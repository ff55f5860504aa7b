//! Experiment configuration, read from TOML.
//!
//! ```toml
//! n = 5000
//! replications = 500
//! regime = "weak"          # or "lrd"
//! seed = 20240611
//! ks_alpha = 0.01
//! sigma2 = 1.0
//!
//! [model]
//! lifetime = { family = "exponential", rate = 1.0 }
//! censor = { family = "exponential", rate = 0.5 }
//! dependence = { variant = "iid" }
//!
//! [grid]
//! h_quantiles = [0.1, 0.25, 0.5, 0.75, 0.9]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::depgen::{Dependence, DependenceModel};
use crate::error::{Error, Result};
use crate::hermite::{DEFAULT_GRID_POINTS, DEFAULT_RANK_TOL};
use crate::limits::{
    Coupling, DEFAULT_SUBGRID, DEFAULT_SURROGATE_LEN, DEFAULT_ZETA_SUBGRID, MAX_H,
};

pub const OUTPUT_DIR_ENV: &str = "SURVFCLT_OUTPUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Weak,
    Lrd,
}

/// Evaluation times, as levels of `H` or as explicit times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_quantiles: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            h_quantiles: Some(vec![0.1, 0.25, 0.5, 0.75, 0.9]),
            times: None,
        }
    }
}

/// Estimate `σ²` from a pilot run instead of fixing it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSpec {
    pub replications: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub subgrid: usize,
    pub zeta_subgrid: usize,
    pub coupling: Coupling,
    pub k_max: usize,
    pub rank_tol: f64,
    pub rank_grid_points: usize,
    pub surrogate_len: usize,
    /// `H`-levels whose variance ratio is a verdict (i.i.d. models only).
    pub variance_levels: Vec<f64>,
    pub variance_tolerance: f64,
    pub centering_se: f64,
    pub min_rank_one_score: f64,
    pub min_abs_correlation: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            subgrid: DEFAULT_SUBGRID,
            zeta_subgrid: DEFAULT_ZETA_SUBGRID,
            coupling: Coupling::Split,
            k_max: 8,
            rank_tol: DEFAULT_RANK_TOL,
            rank_grid_points: DEFAULT_GRID_POINTS,
            surrogate_len: DEFAULT_SURROGATE_LEN,
            variance_levels: vec![0.25, 0.5],
            variance_tolerance: 0.1,
            centering_se: 4.0,
            min_rank_one_score: 0.9,
            min_abs_correlation: 0.95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

fn default_seed() -> u64 {
    1
}

fn default_alpha() -> f64 {
    0.01
}

fn default_sigma2() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub replications: usize,
    pub regime: Regime,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub ks_alpha: f64,
    /// `σ²` in the weak normalisation `(n/σ²)^{1/2}`.
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationSpec>,
    pub model: DependenceModel,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, source: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config {
            path: source.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate().map_err(|e| Error::Config {
            path: source.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.n == 0 {
            return Err(Error::EmptySample);
        }
        if self.replications < 2 {
            return Err(Error::SampleTooSmall {
                size: self.replications,
                min: 2,
            });
        }
        if !(self.ks_alpha > 0.0 && self.ks_alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "ks_alpha = {} must lie in (0, 1)",
                self.ks_alpha
            )));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma2 = {} must be positive",
                self.sigma2
            )));
        }
        match (self.regime, &self.model.dependence) {
            (Regime::Lrd, Dependence::Lrd { .. }) => {}
            (Regime::Weak, Dependence::Iid | Dependence::MixingAr { .. }) => {}
            (regime, dep) => {
                return Err(Error::InvalidParameter(format!(
                    "regime {regime:?} does not match dependence {dep:?}"
                )))
            }
        }
        if let Some(c) = &self.calibration {
            if c.replications < 2 {
                return Err(Error::SampleTooSmall {
                    size: c.replications,
                    min: 2,
                });
            }
        }
        if let Some(q) = &self.grid.h_quantiles {
            if q.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
                return Err(Error::InvalidParameter(
                    "grid h_quantiles must lie in (0, 1)".into(),
                ));
            }
        }
        if self.grid.h_quantiles.is_some() == self.grid.times.is_some() {
            return Err(Error::InvalidParameter(
                "grid needs exactly one of h_quantiles or times".into(),
            ));
        }
        Ok(())
    }

    /// Output directory: the environment override, else the config, else `out`.
    pub fn output_dir(&self) -> PathBuf {
        std::env::var_os(OUTPUT_DIR_ENV)
            .map(PathBuf::from)
            .or_else(|| self.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// The evaluation grid with points above `H = 0.95` (or at 0) removed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedGrid {
    pub times: Vec<f64>,
    pub h_levels: Vec<f64>,
    pub dropped: Vec<f64>,
}

pub fn resolve_grid(cfg: &ExperimentConfig) -> Result<ResolvedGrid> {
    let truth = cfg.model.true_model()?;
    let candidates: Vec<f64> = match (&cfg.grid.h_quantiles, &cfg.grid.times) {
        (Some(q), _) => q.iter().map(|&v| truth.h_quantile(v)).collect(),
        (None, Some(t)) => t.clone(),
        (None, None) => unreachable!("validated"),
    };
    let mut times = Vec::new();
    let mut dropped = Vec::new();
    for t in candidates {
        if t > 0.0 && t.is_finite() && truth.h(t) <= MAX_H {
            times.push(t);
        } else {
            dropped.push(t);
        }
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    if times.is_empty() {
        return Err(Error::InvalidParameter(
            "no grid point satisfies 0 < t and H(t) <= 0.95".into(),
        ));
    }
    let h_levels = times.iter().map(|&t| truth.h(t)).collect();
    Ok(ResolvedGrid {
        times,
        h_levels,
        dropped,
    })
}
