//! Hermite coefficients of the indicator families and the Hermite rank, plus
//! the normalisation `σ_n` under long range dependence.

use survfclt::depgen::SlowlyVarying;
use survfclt::hermite::{
    default_rank_grid, hermite_projection, hermite_rank, monotone_any_coefficient, EventClass,
    IndicatorSpec, RateSpec, Transform,
};
use survfclt::marginal::Marginal;

fn main() -> survfclt::Result<()> {
    let lifetime = Marginal::Exponential { rate: 1.0 };
    let censor = Marginal::Exponential { rate: 0.5 };
    let spec = IndicatorSpec::new(
        Transform::Quantile {
            law: lifetime.clone(),
        },
        censor.clone(),
        EventClass::Any,
    );

    let t = 0.5;
    let p = hermite_projection(&spec, t, 6)?;
    println!("t = {t}: P = {:.6}", p.mean);
    for k in 1..=6 {
        let closed = monotone_any_coefficient(k, t, &spec.transform, &censor);
        println!("  η_{k} = {:+.10}  closed form {:+.10}", p.eta(k), closed);
    }

    let grid = default_rank_grid(&lifetime, 32);
    let ranks = hermite_rank(&spec, &grid, 8, 1e-6)?;
    println!("monotone subordination: {:?}", ranks.summary);

    let positive: Vec<f64> = (1..=32).map(|i| 0.1 * i as f64).collect();
    let abs = hermite_rank(
        &IndicatorSpec::uncensored(Transform::Abs),
        &positive,
        8,
        1e-6,
    )?;
    println!("g = |x|: rank {}", abs.summary.rank);

    let rate = RateSpec::Lrd {
        d: 0.2,
        l0: SlowlyVarying::Shifted,
        r: 1,
    };
    for e in [10, 12, 14] {
        println!("n = 2^{e}: σ_n / n = {:.5}", rate.rate(1 << e)?);
    }
    Ok(())
}
