//! Cadlag pure-jump step functions on `[0, ∞)`.
//!
//! A [`StepFunction`] is stored as an initial value plus a strictly increasing
//! list of jump times with their jump sizes. Evaluation is right-continuous;
//! [`StepFunction::eval_left`] gives the left limit. The Lebesgue-Stieltjes
//! integral against a step function and the product integral of one are the
//! two operations every estimator in this crate is built from.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct StepFunction {
    initial: f64,
    times: Vec<f64>,
    sizes: Vec<f64>,
    // initial + running sum of sizes, so evaluation is a binary search.
    cumulative: Vec<f64>,
}

impl StepFunction {
    /// Builds a step function from `(time, size)` pairs in any order.
    ///
    /// Jumps at equal times are merged by summing their sizes.
    pub fn new(initial: f64, jumps: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        if !initial.is_finite() {
            return Err(Error::InvalidStepFunction(format!(
                "initial value {initial} is not finite"
            )));
        }
        let mut jumps: Vec<(f64, f64)> = jumps.into_iter().collect();
        for &(t, s) in &jumps {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::InvalidStepFunction(format!(
                    "jump time {t} is not a finite nonnegative number"
                )));
            }
            if !s.is_finite() {
                return Err(Error::InvalidStepFunction(format!(
                    "jump size {s} at time {t} is not finite"
                )));
            }
        }
        jumps.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut times: Vec<f64> = Vec::with_capacity(jumps.len());
        let mut sizes: Vec<f64> = Vec::with_capacity(jumps.len());
        for (t, s) in jumps {
            match times.last() {
                Some(&last) if last == t => *sizes.last_mut().unwrap() += s,
                _ => {
                    times.push(t);
                    sizes.push(s);
                }
            }
        }
        Ok(Self::from_sorted(initial, times, sizes))
    }

    /// A function with no jumps.
    pub fn constant(value: f64) -> Self {
        Self::from_sorted(value, Vec::new(), Vec::new())
    }

    /// Caller guarantees `times` is strictly increasing, finite and nonnegative.
    pub(crate) fn from_sorted(initial: f64, times: Vec<f64>, sizes: Vec<f64>) -> Self {
        debug_assert_eq!(times.len(), sizes.len());
        debug_assert!(times.windows(2).all(|w| w[0] < w[1]));
        // Neumaier summation keeps `1 - H_n(u-)` accurate when `H_n` is near 1.
        let mut acc = initial;
        let mut comp = 0.0;
        let cumulative = sizes
            .iter()
            .map(|&s| {
                let next = acc + s;
                comp += if acc.abs() >= s.abs() {
                    (acc - next) + s
                } else {
                    (s - next) + acc
                };
                acc = next;
                acc + comp
            })
            .collect();
        StepFunction {
            initial,
            times,
            sizes,
            cumulative,
        }
    }

    pub fn initial_value(&self) -> f64 {
        self.initial
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.times
    }

    pub fn jump_sizes(&self) -> &[f64] {
        &self.sizes
    }

    /// Values right after each jump.
    pub fn cumulative_values(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.sizes.iter().copied())
    }

    /// Right-continuous value `f(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&u| u <= t);
        self.value_before(idx)
    }

    /// Left limit `f(t-)`, with `f(0-)` equal to the initial value.
    pub fn eval_left(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&u| u < t);
        self.value_before(idx)
    }

    /// Size of the jump at exactly `t`, zero if there is none.
    pub fn jump_at(&self, t: f64) -> f64 {
        match self.times.binary_search_by(|u| u.total_cmp(&t)) {
            Ok(i) => self.sizes[i],
            Err(_) => 0.0,
        }
    }

    fn value_before(&self, idx: usize) -> f64 {
        if idx == 0 {
            self.initial
        } else {
            self.cumulative[idx - 1]
        }
    }

    /// `∫_0^t phi(u) dy(u)` with `y = self`, i.e. the sum of `phi(u_j) Δy(u_j)`
    /// over the jumps `u_j ≤ t`.
    ///
    /// Fails on the first jump inside `[0, t]` where `phi` is not finite.
    pub fn stieltjes_integral<F>(&self, phi: F, t: f64) -> Result<f64>
    where
        F: Fn(f64) -> f64,
    {
        let end = self.times.partition_point(|&u| u <= t);
        let mut acc = 0.0;
        for (&u, &dy) in self.times[..end].iter().zip(&self.sizes[..end]) {
            let value = phi(u);
            if !value.is_finite() {
                return Err(Error::NonFiniteIntegrand { time: u, value });
            }
            acc += value * dy;
        }
        Ok(acc)
    }

    /// The whole path `t ↦ ∫_0^t phi dy` as a step function with the same jump
    /// times as `self` and initial value 0.
    pub fn stieltjes_path<F>(&self, phi: F) -> Result<StepFunction>
    where
        F: Fn(f64) -> f64,
    {
        let mut sizes = Vec::with_capacity(self.sizes.len());
        for (&u, &dy) in self.times.iter().zip(&self.sizes) {
            let value = phi(u);
            if !value.is_finite() {
                return Err(Error::NonFiniteIntegrand { time: u, value });
            }
            sizes.push(value * dy);
        }
        Ok(StepFunction::from_sorted(0.0, self.times.clone(), sizes))
    }

    /// Product integral `π_{u ≤ t} (1 - dx(u))` over the jumps of `x = self`.
    pub fn product_integral(&self, t: f64) -> f64 {
        let end = self.times.partition_point(|&u| u <= t);
        self.sizes[..end].iter().map(|dx| 1.0 - dx).product()
    }

    /// The product integral as a step function starting at 1.
    ///
    /// Jump sizes are differences of consecutive running products, so
    /// `eval(t)` reproduces the running product up to one rounding.
    pub fn product_integral_path(&self) -> StepFunction {
        let mut running = 1.0;
        let mut values = Vec::with_capacity(self.sizes.len());
        let sizes = self
            .sizes
            .iter()
            .map(|dx| {
                let next = running * (1.0 - dx);
                let jump = next - running;
                running = next;
                values.push(next);
                jump
            })
            .collect();
        // Keep the exact running products as cumulative values rather than
        // re-summing the jump sizes.
        StepFunction {
            initial: 1.0,
            times: self.times.clone(),
            sizes,
            cumulative: values,
        }
    }

    /// Pointwise `self - other` on the union of jump times.
    pub fn sub(&self, other: &StepFunction) -> StepFunction {
        let jumps = self
            .jumps()
            .chain(other.jumps().map(|(t, s)| (t, -s)))
            .collect::<Vec<_>>();
        // Inputs are already validated, so this cannot fail.
        StepFunction::new(self.initial - other.initial, jumps)
            .expect("difference of valid step functions")
    }

    /// Writes `# initial_value=<v>` followed by a
    /// `jump_time,jump_size,cumulative_value` table.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# initial_value={}", self.initial).map_err(io_err)?;
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["jump_time", "jump_size", "cumulative_value"])?;
        for i in 0..self.times.len() {
            writer.write_record(&[
                self.times[i].to_string(),
                self.sizes[i].to_string(),
                self.cumulative[i].to_string(),
            ])?;
        }
        writer.flush().map_err(io_err)?;
        Ok(())
    }

    /// Reads the format produced by [`StepFunction::write_csv`]. `source`
    /// names the input in diagnostics.
    pub fn read_csv<R: Read>(input: R, source: &Path) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut first = String::new();
        reader.read_line(&mut first).map_err(|e| Error::Io {
            path: source.to_path_buf(),
            source: e,
        })?;
        let parse_err = |line: u64, field: &str, message: String| Error::Parse {
            path: source.to_path_buf(),
            line,
            field: field.to_string(),
            message,
        };
        let initial: f64 = first
            .trim()
            .strip_prefix("# initial_value=")
            .ok_or_else(|| parse_err(1, "initial_value", "expected `# initial_value=<v>`".into()))?
            .parse()
            .map_err(|e| parse_err(1, "initial_value", format!("{e}")))?;

        let mut rdr = csv::Reader::from_reader(reader);
        let mut jumps = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            // line 1 is the initial value, line 2 the header
            let line = i as u64 + 3;
            let record = record?;
            let get = |idx: usize, name: &str| -> Result<f64> {
                record
                    .get(idx)
                    .ok_or_else(|| parse_err(line, name, "missing".into()))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(line, name, format!("{e}")))
            };
            jumps.push((get(0, "jump_time")?, get(1, "jump_size")?));
        }
        StepFunction::new(initial, jumps)
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io {
        path: "<output>".into(),
        source: e,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_halves() -> StepFunction {
        StepFunction::new(0.0, [(1.0, 0.5), (2.0, 0.5)]).unwrap()
    }

    #[test]
    fn eval_is_right_continuous() {
        let f = two_halves();
        assert_eq!(f.eval(1.0), 0.5);
        assert_eq!(f.eval(0.999), 0.0);
        assert_eq!(f.eval(5.0), 1.0);
    }

    #[test]
    fn eval_left_excludes_jump() {
        let f = two_halves();
        assert_eq!(f.eval_left(1.0), 0.0);
        assert_eq!(f.eval_left(1.5), 0.5);
        assert_eq!(f.eval_left(0.0), f.initial_value());

        let at_zero = StepFunction::new(0.25, [(0.0, 1.0)]).unwrap();
        assert_eq!(at_zero.eval_left(0.0), 0.25);
        assert_eq!(at_zero.eval(0.0), 1.25);
    }

    #[test]
    fn ties_are_merged() {
        let f = StepFunction::new(0.0, [(2.0, 0.25), (1.0, 0.5), (2.0, 0.25)]).unwrap();
        assert_eq!(f.jump_times(), &[1.0, 2.0]);
        assert_eq!(f.jump_sizes(), &[0.5, 0.5]);
    }

    #[test]
    fn rejects_bad_jumps() {
        assert!(StepFunction::new(0.0, [(-1.0, 0.5)]).is_err());
        assert!(StepFunction::new(0.0, [(f64::NAN, 0.5)]).is_err());
        assert!(StepFunction::new(0.0, [(1.0, f64::INFINITY)]).is_err());
    }

    #[test]
    fn stieltjes_examples() {
        let y = two_halves();
        assert_eq!(y.stieltjes_integral(|_| 1.0, 2.0).unwrap(), 1.0);
        assert_eq!(y.stieltjes_integral(|u| u, 2.0).unwrap(), 1.5);
        assert_eq!(y.stieltjes_integral(|_| 1.0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn stieltjes_reports_singular_jump() {
        let y = two_halves();
        let err = y
            .stieltjes_integral(|u| if u == 2.0 { f64::INFINITY } else { 1.0 }, 3.0)
            .unwrap_err();
        match err {
            Error::NonFiniteIntegrand { time, .. } => assert_eq!(time, 2.0),
            other => panic!("unexpected {other:?}"),
        }
        // the singular jump lies outside [0, 1.5]
        assert!(y
            .stieltjes_integral(|u| if u == 2.0 { f64::INFINITY } else { 1.0 }, 1.5)
            .is_ok());
    }

    #[test]
    fn product_integral_examples() {
        let x = StepFunction::new(0.0, [(1.0, 1.0 / 3.0), (3.0, 1.0)]).unwrap();
        assert_eq!(x.product_integral(3.0), 0.0);
        assert_eq!(StepFunction::constant(0.0).product_integral(7.0), 1.0);
        let single = StepFunction::new(0.0, [(1.0, 1.0 / 3.0)]).unwrap();
        assert!((single.product_integral(2.0) - 2.0 / 3.0).abs() < 1e-15);

        let path = x.product_integral_path();
        assert_eq!(path.eval(0.5), 1.0);
        assert_eq!(path.eval(1.0), x.product_integral(1.0));
        assert_eq!(path.eval(3.0), 0.0);
    }

    #[test]
    fn csv_round_trip_keeps_values() {
        let f = StepFunction::new(0.5, [(0.0, 0.125), (1.5, -0.25), (4.0, 1.0 / 3.0)]).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# initial_value=0.5\njump_time,jump_size,cumulative_value\n"));
        let back = StepFunction::read_csv(&buf[..], Path::new("mem")).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn csv_reports_line_and_field() {
        let text = "# initial_value=0\njump_time,jump_size,cumulative_value\n1,0.5,0.5\n2,abc,1\n";
        let err = StepFunction::read_csv(text.as_bytes(), Path::new("f.csv")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("f.csv:4"), "{msg}");
        assert!(msg.contains("jump_size"), "{msg}");
    }

    fn arb_step() -> impl Strategy<Value = StepFunction> {
        (
            -1.0f64..1.0,
            prop::collection::vec((0.0f64..10.0, -1.0f64..1.0), 0..40),
        )
            .prop_map(|(init, jumps)| StepFunction::new(init, jumps).unwrap())
    }

    proptest! {
        #[test]
        fn jump_equals_value_minus_left_limit(f in arb_step(), t in 0.0f64..10.0) {
            let expected = f.jump_at(t);
            prop_assert!((f.eval(t) - f.eval_left(t) - expected).abs() < 1e-12);
            for &u in f.jump_times() {
                prop_assert!((f.eval(u) - f.eval_left(u) - f.jump_at(u)).abs() < 1e-12);
            }
        }

        #[test]
        fn stieltjes_additive_and_linear(
            y in arb_step(),
            s in 0.0f64..10.0,
            t in 0.0f64..10.0,
            a in -3.0f64..3.0,
        ) {
            let (s, t) = if s <= t { (s, t) } else { (t, s) };
            let phi = |u: f64| (u * 0.7).sin() + 1.0;
            let psi = |u: f64| u * u;
            let whole = y.stieltjes_integral(phi, t).unwrap();
            let head = y.stieltjes_integral(phi, s).unwrap();
            let tail = y.stieltjes_integral(|u| if u > s { phi(u) } else { 0.0 }, t).unwrap();
            prop_assert!((whole - head - tail).abs() < 1e-10);

            let combo = y.stieltjes_integral(|u| a * phi(u) + psi(u), t).unwrap();
            let parts = a * whole + y.stieltjes_integral(psi, t).unwrap();
            prop_assert!((combo - parts).abs() < 1e-9);
        }

        #[test]
        fn product_integral_matches_exp_log(
            jumps in prop::collection::vec((0.0f64..10.0, 0.0f64..0.99), 0..40),
            t in 0.0f64..10.0,
        ) {
            let x = StepFunction::new(0.0, jumps).unwrap();
            let via_log: f64 = x
                .jumps()
                .filter(|&(u, _)| u <= t)
                .map(|(_, dx)| (1.0 - dx).ln())
                .sum::<f64>()
                .exp();
            prop_assert!((x.product_integral(t) - via_log).abs() < 1e-12);
        }

        #[test]
        fn csv_round_trip(f in arb_step()) {
            let mut buf = Vec::new();
            f.write_csv(&mut buf).unwrap();
            let back = StepFunction::read_csv(&buf[..], Path::new("mem")).unwrap();
            prop_assert_eq!(back.jump_times(), f.jump_times());
            prop_assert_eq!(back.jump_sizes(), f.jump_sizes());
            prop_assert_eq!(back.initial_value(), f.initial_value());
        }
    }
}
