//! How close a replication-by-grid sample is to rank one.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_DEGENERACY_REPLICATIONS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Degeneracy {
    pub correlations: Vec<Vec<f64>>,
    /// Largest eigenvalue of the sample covariance over its trace.
    pub rank_one_score: f64,
    /// The same share for the correlation matrix, insensitive to scale.
    pub rank_one_score_correlation: f64,
}

impl Degeneracy {
    /// Smallest `|corr|` among pairs of the given grid indices.
    pub fn min_abs_correlation(&self, indices: &[usize]) -> f64 {
        let mut out = f64::INFINITY;
        for (a, &i) in indices.iter().enumerate() {
            for &j in &indices[a + 1..] {
                out = out.min(self.correlations[i][j].abs());
            }
        }
        out
    }
}

fn top_share(m: DMatrix<f64>) -> f64 {
    let trace = m.trace();
    if !(trace > 0.0) {
        return f64::NAN;
    }
    let eig = SymmetricEigen::new(m);
    eig.eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
        / trace
}

/// `samples[replication][grid index]`.
pub fn degeneracy_diagnostic(samples: &[Vec<f64>]) -> Result<Degeneracy> {
    if samples.len() < MIN_DEGENERACY_REPLICATIONS {
        return Err(Error::SampleTooSmall {
            size: samples.len(),
            min: MIN_DEGENERACY_REPLICATIONS,
        });
    }
    let p = samples[0].len();
    let n = samples.len() as f64;
    let means: Vec<f64> = (0..p)
        .map(|j| samples.iter().map(|s| s[j]).sum::<f64>() / n)
        .collect();
    let cov = DMatrix::from_fn(p, p, |i, j| {
        samples
            .iter()
            .map(|s| (s[i] - means[i]) * (s[j] - means[j]))
            .sum::<f64>()
            / (n - 1.0)
    });
    let corr = DMatrix::from_fn(p, p, |i, j| {
        cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt()
    });
    let correlations = (0..p)
        .map(|i| (0..p).map(|j| corr[(i, j)]).collect())
        .collect();
    Ok(Degeneracy {
        correlations,
        rank_one_score: top_share(cov),
        rank_one_score_correlation: top_share(corr),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn exact_rank_one() {
        let zeta = [0.5, -1.0, 2.0, 0.1];
        let mut rng = RngStream::new(1, 0).rng();
        let s: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                zeta.iter().map(|v| v * z).collect()
            })
            .collect();
        let d = degeneracy_diagnostic(&s).unwrap();
        assert!((d.rank_one_score - 1.0).abs() < 1e-12);
        assert!((d.min_abs_correlation(&[0, 1, 2, 3]) - 1.0).abs() < 1e-12);
        assert!(d.correlations[0][1] < 0.0);
    }

    #[test]
    fn white_noise_spreads_evenly() {
        let p = 5;
        let mut rng = RngStream::new(2, 0).rng();
        let s: Vec<Vec<f64>> = (0..5000)
            .map(|_| (0..p).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let d = degeneracy_diagnostic(&s).unwrap();
        assert!(
            (d.rank_one_score - 1.0 / p as f64).abs() < 0.03,
            "{}",
            d.rank_one_score
        );
    }

    #[test]
    fn needs_enough_replications() {
        assert!(degeneracy_diagnostic(&vec![vec![1.0, 2.0]; 50]).is_err());
    }
}
