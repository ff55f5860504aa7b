//! Censored samples under independence, AR(1) mixing and long range
//! dependence, all with `Exp(1)` lifetimes and `Exp(0.5)` censoring.

use survfclt::depgen::{gen_censored_sample, Dependence, DependenceModel, SlowlyVarying};
use survfclt::marginal::Marginal;
use survfclt::rng::RngStream;

fn main() -> survfclt::Result<()> {
    let n = 4096;
    for dependence in [
        Dependence::Iid,
        Dependence::MixingAr { rho: 0.5 },
        Dependence::Lrd {
            d: 0.2,
            l0: SlowlyVarying::Shifted,
        },
    ] {
        let model = DependenceModel {
            dependence: dependence.clone(),
            lifetime: Marginal::Exponential { rate: 1.0 },
            censor: Marginal::Exponential { rate: 0.5 },
        };
        let sample = gen_censored_sample(&model, n, &RngStream::new(42, 0))?;
        let mean = sample.observations().iter().map(|o| o.time).sum::<f64>() / n as f64;
        println!(
            "{dependence:?}: events {}/{n} (expected {:.3}), mean observed time {mean:.4} (expected {:.4})",
            sample.event_count(),
            model.true_model()?.event_probability(),
            1.0 / 1.5
        );
    }
    Ok(())
}
