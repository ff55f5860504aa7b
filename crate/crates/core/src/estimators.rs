//! Right-censored samples, the empirical subdistribution functions, the
//! Nelson-Aalen and Kaplan-Meier estimators, and the population functions
//! they estimate.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::marginal::Marginal;
use crate::quadrature::adaptive_simpson;
use crate::stepfun::StepFunction;

/// One observed pair `(min(T, τ), 1{T ≤ τ})`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CensoredObservation {
    pub time: f64,
    pub event: bool,
}

/// A nonempty censored sample, kept in observation order.
#[derive(Clone, Debug, PartialEq)]
pub struct CensoredSample {
    observations: Vec<CensoredObservation>,
}

/// Count of observations and of events at one distinct time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeCount {
    pub time: f64,
    pub total: usize,
    pub events: usize,
}

impl CensoredSample {
    pub fn new(observations: Vec<CensoredObservation>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptySample);
        }
        for (index, o) in observations.iter().enumerate() {
            if !(o.time.is_finite() && o.time >= 0.0) {
                return Err(Error::InvalidObservation {
                    index,
                    time: o.time,
                });
            }
        }
        Ok(CensoredSample { observations })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, bool)>) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .map(|(time, event)| CensoredObservation { time, event })
                .collect(),
        )
    }

    pub fn observations(&self) -> &[CensoredObservation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn event_count(&self) -> usize {
        self.observations.iter().filter(|o| o.event).count()
    }

    /// Distinct times in increasing order with their counts.
    pub fn time_counts(&self) -> Vec<TimeCount> {
        let mut sorted: Vec<CensoredObservation> = self.observations.clone();
        sorted.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut out: Vec<TimeCount> = Vec::new();
        for o in sorted {
            match out.last_mut() {
                Some(last) if last.time == o.time => {
                    last.total += 1;
                    last.events += usize::from(o.event);
                }
                _ => out.push(TimeCount {
                    time: o.time,
                    total: 1,
                    events: usize::from(o.event),
                }),
            }
        }
        out
    }

    /// Reads a `time,event` CSV with a header row; `event` is 0 or 1.
    pub fn read_csv<R: Read>(input: R, source: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = rdr.headers()?.clone();
        let empty = || Error::Parse {
            path: source.to_path_buf(),
            line: 1,
            field: "time".into(),
            message: "no observations (n = 0)".into(),
        };
        if headers.is_empty() {
            return Err(empty());
        }
        let col = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Parse {
                    path: source.to_path_buf(),
                    line: 1,
                    field: name.to_string(),
                    message: "missing column".into(),
                })
        };
        let (time_col, event_col) = (col("time")?, col("event")?);
        let mut obs = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let err = |field: &str, message: String| Error::Parse {
                path: source.to_path_buf(),
                line,
                field: field.to_string(),
                message,
            };
            let time: f64 = record
                .get(time_col)
                .unwrap_or("")
                .parse()
                .map_err(|e| err("time", format!("{e}")))?;
            if !time.is_finite() || time < 0.0 {
                return Err(err(
                    "time",
                    format!("{time} is not a finite nonnegative time"),
                ));
            }
            let event = match record.get(event_col).unwrap_or("") {
                "1" => true,
                "0" => false,
                other => return Err(err("event", format!("expected 0 or 1, got {other:?}"))),
            };
            obs.push(CensoredObservation { time, event });
        }
        if obs.is_empty() {
            return Err(empty());
        }
        Self::new(obs)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "event"])?;
        for o in &self.observations {
            w.write_record([o.time.to_string(), u8::from(o.event).to_string()])?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<output>".into(),
            source: e,
        })?;
        Ok(())
    }
}

/// Pairs `(min(T_i, τ_i), 1{T_i ≤ τ_i})`; ties count as events.
pub fn censoring_overlay(lifetimes: &[f64], censors: &[f64]) -> Result<CensoredSample> {
    if lifetimes.len() != censors.len() {
        return Err(Error::LengthMismatch {
            lifetimes: lifetimes.len(),
            censors: censors.len(),
        });
    }
    CensoredSample::from_pairs(
        lifetimes
            .iter()
            .zip(censors)
            .map(|(&t, &c)| (t.min(c), t <= c)),
    )
}

/// `(H_n, H_n¹, H_n⁰)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Subdistributions {
    pub all: StepFunction,
    pub events: StepFunction,
    pub censored: StepFunction,
}

pub fn empirical_subdistributions(sample: &CensoredSample) -> Subdistributions {
    let n = sample.len() as f64;
    let counts = sample.time_counts();
    let mut all = (Vec::new(), Vec::new());
    let mut events = (Vec::new(), Vec::new());
    let mut censored = (Vec::new(), Vec::new());
    for c in &counts {
        all.0.push(c.time);
        all.1.push(c.total as f64 / n);
        if c.events > 0 {
            events.0.push(c.time);
            events.1.push(c.events as f64 / n);
        }
        if c.total > c.events {
            censored.0.push(c.time);
            censored.1.push((c.total - c.events) as f64 / n);
        }
    }
    Subdistributions {
        all: StepFunction::from_sorted(0.0, all.0, all.1),
        events: StepFunction::from_sorted(0.0, events.0, events.1),
        censored: StepFunction::from_sorted(0.0, censored.0, censored.1),
    }
}

/// Nelson-Aalen estimator as a sum of `d(u)/Y(u)` over distinct event times,
/// where `Y(u)` counts observations with time `≥ u` (events at `u` are still at
/// risk, as are censorings at `u`).
pub fn nelson_aalen(sample: &CensoredSample) -> StepFunction {
    let counts = sample.time_counts();
    let mut at_risk = sample.len();
    let mut times = Vec::new();
    let mut sizes = Vec::new();
    for c in counts {
        if c.events > 0 {
            times.push(c.time);
            sizes.push(c.events as f64 / at_risk as f64);
        }
        at_risk -= c.total;
    }
    StepFunction::from_sorted(0.0, times, sizes)
}

/// Nelson-Aalen estimator through the integral map
/// `(x, y) ↦ ∫_0^· (1 - x(u-))⁻¹ dy(u)` applied to `(H_n, H_n¹)`.
pub fn nelson_aalen_integral(sample: &CensoredSample) -> StepFunction {
    let sub = empirical_subdistributions(sample);
    nelson_aalen_from(&sub.all, &sub.events)
        .expect("every event time of a sample has a nonempty risk set")
}

/// The integral map on arbitrary step functions. Fails when `1 - x(u-)` is zero
/// at a jump of `y`.
pub fn nelson_aalen_from(x: &StepFunction, y: &StepFunction) -> Result<StepFunction> {
    y.stieltjes_path(|u| {
        let remaining = 1.0 - x.eval_left(u);
        if remaining <= 0.0 {
            f64::INFINITY
        } else {
            1.0 / remaining
        }
    })
    .map_err(|e| match e {
        Error::NonFiniteIntegrand { time, .. } => Error::EmptyRiskSet { time },
        other => other,
    })
}

/// Kaplan-Meier estimator: the product integral of the Nelson-Aalen estimator.
pub fn kaplan_meier(sample: &CensoredSample) -> StepFunction {
    nelson_aalen(sample).product_integral_path()
}

/// Both estimators from one pass.
pub fn estimate(sample: &CensoredSample) -> (StepFunction, StepFunction) {
    let na = nelson_aalen(sample);
    let km = na.product_integral_path();
    (na, km)
}

/// Population functions of the censoring model with independent lifetimes
/// `T ~ F` and censoring times `τ ~ G`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrueModel {
    lifetime: Marginal,
    censor: Marginal,
    event_probability: f64,
}

const H1_TOL: f64 = 1e-10;

impl TrueModel {
    pub fn new(lifetime: Marginal, censor: Marginal) -> Result<Self> {
        lifetime.validate()?;
        censor.validate()?;
        if lifetime.is_never() {
            return Err(Error::InvalidDistribution(
                "lifetime law cannot be degenerate at infinity".into(),
            ));
        }
        if !lifetime.is_nonnegative() || !censor.is_nonnegative() {
            return Err(Error::InvalidDistribution(
                "lifetimes and censoring times must be nonnegative".into(),
            ));
        }
        let mut model = TrueModel {
            lifetime,
            censor,
            event_probability: 1.0,
        };
        model.event_probability = model.h1(f64::INFINITY);
        Ok(model)
    }

    pub fn lifetime(&self) -> &Marginal {
        &self.lifetime
    }

    pub fn censor(&self) -> &Marginal {
        &self.censor
    }

    /// `H(t) = 1 - (1 - F(t))(1 - G(t))`.
    pub fn h(&self, t: f64) -> f64 {
        1.0 - self.h_sf(t)
    }

    /// `1 - H(t)` without cancellation.
    pub fn h_sf(&self, t: f64) -> f64 {
        self.lifetime.sf(t) * self.censor.sf(t)
    }

    /// `H¹(t) = ∫_0^t (1 - G(u-)) dF(u)`, the event subdistribution.
    pub fn h1(&self, t: f64) -> f64 {
        if t <= 0.0 && self.lifetime.cdf(0.0) == 0.0 {
            return 0.0;
        }
        match (&self.lifetime, &self.censor) {
            (_, Marginal::Never) => self.lifetime.cdf(t),
            (Marginal::Exponential { rate: a }, Marginal::Exponential { rate: b }) => {
                a / (a + b) * self.h(t)
            }
            _ => self.h1_between(0.0, t),
        }
    }

    /// `H¹(b) - H¹(a)` by quadrature in the probability scale of `F`,
    /// `∫_{F(a)}^{F(b)} (1 - G(F⁻¹(p))) dp`, which has a bounded integrand.
    fn h1_between(&self, a: f64, b: f64) -> f64 {
        let pa = self.lifetime.cdf(a);
        let pb = if b.is_infinite() {
            1.0
        } else {
            self.lifetime.cdf(b)
        };
        if pb <= pa {
            return 0.0;
        }
        let mut cuts = vec![pa];
        for k in self.censor.knots() {
            let pk = self.lifetime.cdf(k);
            if pk > pa && pk < pb {
                cuts.push(pk);
            }
        }
        cuts.push(pb);
        let integrand = |p: f64| self.censor.sf(self.lifetime.quantile(p));
        cuts.windows(2)
            .map(|w| adaptive_simpson(&integrand, w[0], w[1], H1_TOL))
            .sum()
    }

    /// `H¹` on an increasing grid, accumulated interval by interval.
    pub fn h1_on_grid(&self, grid: &[f64]) -> Vec<f64> {
        let closed_form = matches!(
            (&self.lifetime, &self.censor),
            (_, Marginal::Never) | (Marginal::Exponential { .. }, Marginal::Exponential { .. })
        );
        if closed_form {
            return grid.iter().map(|&t| self.h1(t)).collect();
        }
        let mut out = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        let mut prev = 0.0;
        for &t in grid {
            if t > prev {
                acc += self.h1_between(prev, t);
                prev = t;
            }
            out.push(acc);
        }
        out
    }

    pub fn h0(&self, t: f64) -> f64 {
        self.h(t) - self.h1(t)
    }

    /// `P(δ = 1) = H¹(∞)`.
    pub fn event_probability(&self) -> f64 {
        self.event_probability
    }

    /// `Λ(t) = -log(1 - F(t))`.
    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        -self.lifetime.sf(t).ln()
    }

    pub fn survival(&self, t: f64) -> f64 {
        self.lifetime.sf(t)
    }

    /// `H⁻¹(q)` for `q ∈ (0, 1)`.
    pub fn h_quantile(&self, q: f64) -> f64 {
        if let (Marginal::Exponential { rate: a }, Marginal::Exponential { rate: b }) =
            (&self.lifetime, &self.censor)
        {
            return -(-q).ln_1p() / (a + b);
        }
        if self.censor.is_never() {
            return self.lifetime.quantile(q);
        }
        // H ≥ F pointwise, so F⁻¹(q) brackets the answer from above.
        let mut hi = self.lifetime.quantile(q);
        let mut lo = 0.0;
        if !hi.is_finite() {
            hi = 1.0;
            while self.h(hi) < q {
                hi *= 2.0;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.h(mid) < q {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi.max(1e-300) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn three_point() -> CensoredSample {
        CensoredSample::from_pairs([(1.0, true), (2.0, false), (3.0, true)]).unwrap()
    }

    #[test]
    fn overlay_examples() {
        let s = censoring_overlay(&[1.0, 5.0], &[2.0, 3.0]).unwrap();
        assert_eq!(
            s.observations(),
            &[
                CensoredObservation {
                    time: 1.0,
                    event: true
                },
                CensoredObservation {
                    time: 3.0,
                    event: false
                }
            ]
        );
        let tie = censoring_overlay(&[2.0], &[2.0]).unwrap();
        assert_eq!(
            tie.observations()[0],
            CensoredObservation {
                time: 2.0,
                event: true
            }
        );
        let s = censoring_overlay(&[4.0, 1.0, 7.0], &[3.0, 9.0, 7.0]).unwrap();
        let pairs: Vec<(f64, bool)> = s.observations().iter().map(|o| (o.time, o.event)).collect();
        assert_eq!(pairs, vec![(3.0, false), (1.0, true), (7.0, true)]);
        assert!(matches!(
            censoring_overlay(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(matches!(
            CensoredSample::new(vec![]),
            Err(Error::EmptySample)
        ));
        assert!(CensoredSample::from_pairs([(-1.0, true)]).is_err());
    }

    #[test]
    fn subdistributions_three_point() {
        let sub = empirical_subdistributions(&three_point());
        let third = 1.0 / 3.0;
        assert_eq!(sub.all.jump_times(), &[1.0, 2.0, 3.0]);
        assert!(sub.all.jump_sizes().iter().all(|&s| s == third));
        assert_eq!(sub.events.jump_times(), &[1.0, 3.0]);
        assert!(sub.events.jump_sizes().iter().all(|&s| s == third));
        assert_eq!(sub.censored.jump_times(), &[2.0]);
        assert_eq!(sub.censored.jump_sizes(), &[third]);
    }

    #[test]
    fn subdistributions_edge_cases() {
        let all_events = CensoredSample::from_pairs([(1.0, true), (2.0, true)]).unwrap();
        assert!(empirical_subdistributions(&all_events).censored.is_empty());

        let single = CensoredSample::from_pairs([(5.0, false)]).unwrap();
        let sub = empirical_subdistributions(&single);
        assert_eq!(sub.all, sub.censored);
        assert_eq!(sub.all.eval(5.0), 1.0);
        assert!(sub.events.is_empty());
    }

    #[test]
    fn nelson_aalen_three_point() {
        let na = nelson_aalen(&three_point());
        assert_eq!(na.jump_times(), &[1.0, 3.0]);
        assert_eq!(na.jump_sizes(), &[1.0 / 3.0, 1.0]);
        assert_eq!(na.eval(3.0), 4.0 / 3.0);
        assert_eq!(na.eval(2.5), 1.0 / 3.0);
    }

    #[test]
    fn nelson_aalen_edge_cases() {
        let none = CensoredSample::from_pairs([(1.0, false), (2.0, false)]).unwrap();
        assert!(nelson_aalen(&none).is_empty());
        assert_eq!(nelson_aalen(&none).eval(10.0), 0.0);

        let tied = CensoredSample::from_pairs([(1.0, true), (1.0, true)]).unwrap();
        let na = nelson_aalen(&tied);
        assert_eq!(na.jump_times(), &[1.0]);
        assert_eq!(na.jump_sizes(), &[1.0]);
    }

    #[test]
    fn events_precede_censorings_at_ties() {
        // At u = 2 one event and one censoring; both are in the risk set.
        let s = CensoredSample::from_pairs([(2.0, true), (2.0, false), (3.0, true)]).unwrap();
        let na = nelson_aalen(&s);
        assert_eq!(na.jump_sizes(), &[1.0 / 3.0, 1.0]);
    }

    #[test]
    fn integral_map_reports_empty_risk_set() {
        let x = StepFunction::new(0.0, [(1.0, 1.0)]).unwrap();
        let y = StepFunction::new(0.0, [(1.0, 0.5), (2.0, 0.5)]).unwrap();
        match nelson_aalen_from(&x, &y) {
            Err(Error::EmptyRiskSet { time }) => assert_eq!(time, 2.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn kaplan_meier_examples() {
        let km = kaplan_meier(&three_point());
        assert!((km.eval(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(km.eval(3.0), 0.0);

        let uncensored = CensoredSample::from_pairs([(1.0, true), (2.0, true)]).unwrap();
        let km = kaplan_meier(&uncensored);
        assert_eq!(km.eval(0.5), 1.0);
        assert_eq!(km.eval(1.0), 0.5);
        assert_eq!(km.eval(2.0), 0.0);

        let none = CensoredSample::from_pairs([(1.0, false)]).unwrap();
        assert_eq!(kaplan_meier(&none).eval(5.0), 1.0);
    }

    #[test]
    fn true_model_exponential_pair() {
        let m = TrueModel::new(
            Marginal::Exponential { rate: 1.0 },
            Marginal::Exponential { rate: 0.5 },
        )
        .unwrap();
        for &t in &[0.1, 0.5, 1.0, 3.0] {
            let h = 1.0 - (-1.5f64 * t).exp();
            assert!((m.h(t) - h).abs() < 1e-15);
            assert!((m.h1(t) - 2.0 / 3.0 * h).abs() < 1e-15);
            // closed form against the generic quadrature route
            assert!((m.h1_between(0.0, t) - 2.0 / 3.0 * h).abs() < 1e-10);
            assert!((m.cumulative_hazard(t) - t).abs() < 1e-14);
        }
        assert!((m.event_probability() - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.h1(1e6) + m.h0(1e6) - 1.0).abs() < 1e-12);
        assert!((m.h(m.h_quantile(0.5)) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn true_model_without_censoring() {
        let m = TrueModel::new(
            Marginal::Weibull {
                shape: 1.5,
                scale: 2.0,
            },
            Marginal::Never,
        )
        .unwrap();
        for &t in &[0.2, 1.0, 4.0] {
            assert!((m.h(t) - m.lifetime().cdf(t)).abs() < 1e-15);
            assert!((m.h1(t) - m.h(t)).abs() < 1e-15);
            assert!(m.h0(t).abs() < 1e-15);
        }
    }

    #[test]
    fn true_model_quadrature_route() {
        // Uniform censoring on [0, 2] against Exp(1): H¹(t) = ∫_0^t e^{-u}(1 - u/2) du
        let m = TrueModel::new(
            Marginal::Exponential { rate: 1.0 },
            Marginal::Uniform {
                low: 0.0,
                high: 2.0,
            },
        )
        .unwrap();
        let exact = |t: f64| {
            let t = t.min(2.0);
            (1.0 - (-t).exp()) - 0.5 * (1.0 - (1.0 + t) * (-t).exp())
        };
        for &t in &[0.3, 1.0, 1.9, 2.5] {
            assert!((m.h1(t) - exact(t)).abs() < 1e-9, "t={t}");
        }
        let grid = [0.1, 0.7, 1.4, 2.0, 3.0];
        for (v, &t) in m.h1_on_grid(&grid).iter().zip(&grid) {
            assert!((v - exact(t)).abs() < 1e-9);
        }
        assert!((m.event_probability() - exact(2.0)).abs() < 1e-9);
        let q = m.h_quantile(0.4);
        assert!((m.h(q) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(TrueModel::new(Marginal::Never, Marginal::Never).is_err());
        assert!(TrueModel::new(Marginal::standard_normal(), Marginal::Never).is_err());
        assert!(TrueModel::new(Marginal::Exponential { rate: -1.0 }, Marginal::Never).is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let s = three_point();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "time,event\n1,1\n2,0\n3,1\n"
        );
        assert_eq!(
            CensoredSample::read_csv(&buf[..], Path::new("s.csv")).unwrap(),
            s
        );

        let bad = "time,event\n1,1\n2,yes\n";
        let msg = CensoredSample::read_csv(bad.as_bytes(), Path::new("s.csv"))
            .unwrap_err()
            .to_string();
        assert!(msg.contains("s.csv:3") && msg.contains("event"), "{msg}");

        let empty = "time,event\n";
        let msg = CensoredSample::read_csv(empty.as_bytes(), Path::new("e.csv"))
            .unwrap_err()
            .to_string();
        assert!(msg.contains("n = 0"), "{msg}");
    }

    fn arb_sample() -> impl Strategy<Value = CensoredSample> {
        prop::collection::vec((0u32..60, any::<bool>()), 1..200).prop_map(|v| {
            // coarse times so ties are common
            CensoredSample::from_pairs(v.into_iter().map(|(t, e)| (t as f64 * 0.25, e))).unwrap()
        })
    }

    proptest! {
        #[test]
        fn integral_and_risk_set_forms_agree(s in arb_sample()) {
            let a = nelson_aalen(&s);
            let b = nelson_aalen_integral(&s);
            prop_assert_eq!(a.jump_times(), b.jump_times());
            for (x, y) in a.cumulative_values().iter().zip(b.cumulative_values()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn subdistributions_add_up(s in arb_sample()) {
            let sub = empirical_subdistributions(&s);
            for &t in sub.all.jump_times() {
                let total = sub.events.jump_at(t) + sub.censored.jump_at(t);
                prop_assert!((sub.all.jump_at(t) - total).abs() < 1e-15);
            }
            prop_assert!((sub.all.eval(1e9) - 1.0).abs() < 1e-12);
        }
    }
}
