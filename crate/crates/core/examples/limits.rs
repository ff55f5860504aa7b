//! Limit processes: the Brownian-bridge limit under weak dependence and the
//! degenerate `ζ_r(t) Z_r / r!` limit under long range dependence.

use survfclt::depgen::{Dependence, DependenceModel, SlowlyVarying};
use survfclt::hermite::default_rank_grid;
use survfclt::limits::{
    simulate_lrd_limit, weak_limit_sample, weak_limit_variance, zeta_for_model, Coupling,
    WeakLimitSimulator, DEFAULT_SUBGRID, DEFAULT_SURROGATE_LEN, DEFAULT_ZETA_SUBGRID,
};
use survfclt::marginal::Marginal;

fn variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

fn main() -> survfclt::Result<()> {
    let mut model = DependenceModel {
        dependence: Dependence::Iid,
        lifetime: Marginal::Exponential { rate: 1.0 },
        censor: Marginal::Exponential { rate: 0.5 },
    };
    let truth = model.true_model()?;
    let grid: Vec<f64> = [0.25, 0.5, 0.75]
        .iter()
        .map(|&q| truth.h_quantile(q))
        .collect();

    let sim = WeakLimitSimulator::new(&truth, &grid, DEFAULT_SUBGRID, Coupling::Split)?;
    let (na, _km) = weak_limit_sample(&truth, &sim, 2000, 7);
    for (j, &t) in grid.iter().enumerate() {
        println!(
            "weak: t = {t:.4}  simulated Var = {:.4}  ∫(1-H)⁻² dH¹ = {:.4}",
            variance(&na.column(j)),
            weak_limit_variance(&truth, t)
        );
    }

    model.dependence = Dependence::Lrd {
        d: 0.2,
        l0: SlowlyVarying::Shifted,
    };
    let rank_grid = default_rank_grid(&model.lifetime, 64);
    let (zeta, ranks) = zeta_for_model(&model, &grid, &rank_grid, 8, 1e-6, DEFAULT_ZETA_SUBGRID)?;
    println!("lrd: rank {}, ζ literal {:.4?}", ranks.rank, zeta.literal);
    println!("lrd: ζ substitution {:.4?}", zeta.substitution);
    let lrd = simulate_lrd_limit(
        &zeta.substitution,
        zeta.r,
        &model,
        &grid,
        500,
        7,
        DEFAULT_SURROGATE_LEN,
    )?;
    println!("lrd: {}", lrd.metadata_json()?);
    Ok(())
}
