//! Problem statement types: fractional order, time grids and source functions.

use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};

/// A fractional integration order strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    /// Construct an order, rejecting values on or outside the open interval (0, 1).
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!(
                "order must lie strictly inside (0, 1), got {alpha}"
            )));
        }
        Ok(Self(alpha))
    }

    pub fn alpha(self) -> f64 {
        self.0
    }

    /// 1 - alpha, the exponent governing the slow tail of the kernel.
    pub fn complement(self) -> f64 {
        1.0 - self.0
    }
}

/// A finite, strictly increasing grid t_0 < t_1 < ... < t_P with P >= 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Argument(format!(
                "grid needs at least two points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(Error::Argument("grid contains a non-finite point".into()));
        }
        for (i, w) in points.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::Argument(format!(
                    "grid must be strictly increasing, violated at index {} ({} -> {})",
                    i + 1,
                    w[0],
                    w[1]
                )));
            }
        }
        Ok(Self { points })
    }

    /// Uniform grid of `steps` intervals on [a, b].
    pub fn uniform(a: f64, b: f64, steps: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Argument(format!("need a < b, got [{a}, {b}]")));
        }
        if steps == 0 {
            return Err(Error::Argument("need at least one step".into()));
        }
        let h = (b - a) / steps as f64;
        let mut points: Vec<f64> = (0..=steps).map(|i| a + i as f64 * h).collect();
        // pin the right endpoint exactly
        *points.last_mut().unwrap() = b;
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of grid points (P + 1).
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of intervals P.
    pub fn interval_count(&self) -> usize {
        self.points.len() - 1
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        *self.points.last().unwrap()
    }

    /// Step width t_n - t_{n-1} for n in 1..=P.
    pub fn step(&self, n: usize) -> f64 {
        self.points[n] - self.points[n - 1]
    }

    pub fn min_step(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// The forcing function f of the fractional integral.
///
/// Built-in symbolic forms cover the usual test cases; arbitrary data enters
/// through `Sampled`, which interpolates piecewise-linearly and refuses to
/// extrapolate outside its sample range.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceFunction {
    Constant(f64),
    /// tau^p with p >= 0.
    Monomial { exponent: f64 },
    /// (tau - origin)^p with p >= 0.
    ShiftedMonomial { exponent: f64, origin: f64 },
    /// sin(tau)
    Sine,
    /// exp(tau)
    Exponential,
    /// Piecewise-linear interpolation of (time, value) samples.
    Sampled { times: Vec<f64>, values: Vec<f64> },
}

impl SourceFunction {
    pub fn monomial(exponent: f64) -> Result<Self> {
        if !(exponent.is_finite() && exponent >= 0.0) {
            return Err(Error::Domain(format!(
                "monomial exponent must be >= 0, got {exponent}"
            )));
        }
        Ok(Self::Monomial { exponent })
    }

    pub fn shifted_monomial(exponent: f64, origin: f64) -> Result<Self> {
        if !(exponent.is_finite() && exponent >= 0.0 && origin.is_finite()) {
            return Err(Error::Domain(format!(
                "shifted monomial needs exponent >= 0 and finite origin, got p={exponent}, origin={origin}"
            )));
        }
        Ok(Self::ShiftedMonomial { exponent, origin })
    }

    pub fn sampled(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Argument(format!(
                "sample columns disagree in length: {} times vs {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::Argument("need at least two samples".into()));
        }
        if times.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Argument("samples contain a non-finite entry".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument(
                "sample times must be strictly increasing".into(),
            ));
        }
        Ok(Self::Sampled { times, values })
    }

    /// Parse a CSV stream with header `t,f` into a sampled function.
    pub fn from_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Io("empty csv input".into()))??;
        let header = header.trim_start_matches('\u{feff}').trim();
        if header != "t,f" {
            return Err(Error::Io(format!("expected header `t,f`, got `{header}`")));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let (t, v) = match (cols.next(), cols.next(), cols.next()) {
                (Some(t), Some(v), None) => (t, v),
                _ => {
                    return Err(Error::Io(format!(
                        "row {}: expected two comma-separated columns, got `{line}`",
                        i + 2
                    )))
                }
            };
            let t: f64 = t
                .trim()
                .parse()
                .map_err(|_| Error::Io(format!("row {}: bad time `{t}`", i + 2)))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Io(format!("row {}: bad value `{v}`", i + 2)))?;
            times.push(t);
            values.push(v);
        }
        Self::sampled(times, values)
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_csv(std::io::BufReader::new(file))
    }

    /// Evaluate at `t`. Sampled functions reject queries outside their range.
    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            Self::Constant(c) => Ok(*c),
            Self::Monomial { exponent } => Ok(t.powf(*exponent)),
            Self::ShiftedMonomial { exponent, origin } => Ok((t - origin).powf(*exponent)),
            Self::Sine => Ok(t.sin()),
            Self::Exponential => Ok(t.exp()),
            Self::Sampled { times, values } => {
                let first = times[0];
                let last = *times.last().unwrap();
                if t < first || t > last {
                    return Err(Error::Domain(format!(
                        "sample range [{first}, {last}] does not cover t = {t}"
                    )));
                }
                // partition_point gives the first index with times[i] > t
                let hi = times.partition_point(|&s| s <= t);
                if hi == times.len() {
                    return Ok(*values.last().unwrap());
                }
                let lo = hi - 1;
                let w = (t - times[lo]) / (times[hi] - times[lo]);
                Ok(values[lo] + w * (values[hi] - values[lo]))
            }
        }
    }

    /// Whether every point of [a, b] is evaluable.
    pub fn covers(&self, a: f64, b: f64) -> bool {
        match self {
            Self::Sampled { times, .. } => times[0] <= a && *times.last().unwrap() >= b,
            _ => true,
        }
    }
}

/// The full problem statement: order, interval and forcing.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalProblem {
    order: FractionalOrder,
    a: f64,
    b: f64,
    f: SourceFunction,
}

impl FractionalProblem {
    pub fn new(order: FractionalOrder, a: f64, b: f64, f: SourceFunction) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Argument(format!("need a < b, got [{a}, {b}]")));
        }
        if !f.covers(a, b) {
            return Err(Error::Domain(format!(
                "source function does not cover [{a}, {b}]"
            )));
        }
        Ok(Self { order, a, b, f })
    }

    pub fn order(&self) -> FractionalOrder {
        self.order
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn source(&self) -> &SourceFunction {
        &self.f
    }
}
