//! The O(Lambda * P) fast evaluator built on the exponential-sum kernel.
//!
//! f is interpolated by the piecewise constant taking the right-endpoint value
//! on each interval. The weight of the current interval uses the exact kernel
//! (the exponential sum is only valid for lags >= delta); every older interval
//! is folded into per-rate accumulators advanced by one multiply-add per step:
//!
//! ```text
//! Phi_l^n = K_{l,n,n-1} F^{n-1} + e^{beta_l dt_n} Phi_l^{n-1},   Phi_l^1 = 0,
//! I(t_n) ~ z_nn F^n + sum_l Phi_l^n.
//! ```
//!
//! Rates here are the negated exponential-sum rates (beta_l = -rate_l < 0), so
//! every damping factor is below one and the recursion is unconditionally
//! stable. Only the accumulators and the previous sample are retained: memory
//! is independent of the grid size.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use std::time::Instant;

#[cfg(feature = "parallel")]
use crate::diffusive::PAR_NODE_THRESHOLD;
use crate::error::{Error, Result};
use crate::expsum::ExpSumApproximation;
use crate::problem::{FractionalOrder, FractionalProblem, TimeGrid};
use crate::special::{c_alpha, gamma};
use crate::trace::EvaluationTrace;

/// Weight of the current interval: c_alpha int_{t-dt}^{t} K(t - tau) dtau with
/// the exact kernel, which collapses to dt^alpha / Gamma(alpha + 1).
pub fn local_weight(order: FractionalOrder, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::Argument(format!("need dt > 0, got {dt}")));
    }
    Ok(dt.powf(order.alpha()) / gamma(order.alpha() + 1.0)?)
}

/// Exact integral of one exponential-sum term over a history interval:
/// c w int_{t_jm1}^{t_j} e^{beta (t_n - tau)} dtau, beta < 0.
///
/// Evaluated as c w e^{beta (t_n - t_j)} expm1(beta (t_j - t_jm1)) / beta so
/// nearby exponents never cancel.
pub fn k_weight(
    c_alpha_val: f64,
    weight: f64,
    beta: f64,
    t_n: f64,
    t_jm1: f64,
    t_j: f64,
) -> Result<f64> {
    if !(beta < 0.0) {
        return Err(Error::Argument(format!("need beta < 0, got {beta}")));
    }
    if !(t_jm1 < t_j && t_j <= t_n) {
        return Err(Error::Argument(format!(
            "need t_jm1 < t_j <= t_n, got {t_jm1}, {t_j}, {t_n}"
        )));
    }
    let lag = t_n - t_j;
    let width = t_j - t_jm1;
    Ok(c_alpha_val * weight * (beta * lag).exp() * (beta * width).exp_m1() / beta)
}

/// Per-rate history accumulators plus the one retained sample.
#[derive(Debug, Clone)]
pub struct HistoryAccumulator {
    c_alpha: f64,
    /// (weight, beta) pairs with beta = -rate < 0.
    terms: Vec<(f64, f64)>,
    phi: Vec<f64>,
    last_time: f64,
    last_value: f64,
    /// Width of the interval ending at `last_time`; the recursion's interval
    /// weight integrates over it.
    prev_step: f64,
}

impl HistoryAccumulator {
    /// Accumulator state right after the first grid interval (t_0, t_1]:
    /// all accumulators zero, (t_1, F^1) retained.
    pub fn init(expsum: &ExpSumApproximation, t_0: f64, t_1: f64, f_1: f64) -> Result<Self> {
        if !(t_1 > t_0) {
            return Err(Error::Argument(format!("need t_1 > t_0, got {t_0}, {t_1}")));
        }
        let terms: Vec<(f64, f64)> = expsum
            .terms()
            .iter()
            .map(|t| (t.weight, -t.rate))
            .collect();
        let phi = vec![0.0; terms.len()];
        Ok(Self {
            c_alpha: c_alpha(expsum.order()),
            terms,
            phi,
            last_time: t_1,
            last_value: f_1,
            prev_step: t_1 - t_0,
        })
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn last_time(&self) -> f64 {
        self.last_time
    }

    pub fn history_sum(&self) -> f64 {
        self.phi.iter().sum()
    }
}

/// One recursion step: fold the retained sample into every accumulator and
/// retain (t_n, f_n) instead.
pub fn advance(mut acc: HistoryAccumulator, t_n: f64, f_n: f64) -> Result<HistoryAccumulator> {
    if !(t_n > acc.last_time) {
        return Err(Error::Argument(format!(
            "advance target {t_n} does not move past {}",
            acc.last_time
        )));
    }
    let dt = t_n - acc.last_time;
    let t_prev = acc.last_time;
    let t_prev2 = acc.last_time - acc.prev_step;
    let c = acc.c_alpha;
    let f_prev = acc.last_value;
    let terms = &acc.terms;
    let update = |(weight, beta): &(f64, f64), phi: f64| -> f64 {
        let lag = t_n - t_prev;
        let width = t_prev - t_prev2;
        let k = c * weight * (beta * lag).exp() * (beta * width).exp_m1() / beta;
        k * f_prev + (beta * dt).exp() * phi
    };

    #[cfg(feature = "parallel")]
    if terms.len() >= PAR_NODE_THRESHOLD {
        let phi = std::mem::take(&mut acc.phi);
        acc.phi = terms
            .par_iter()
            .zip(phi.into_par_iter())
            .map(|(term, phi)| update(term, phi))
            .collect();
        acc.last_time = t_n;
        acc.last_value = f_n;
        acc.prev_step = dt;
        return Ok(acc);
    }

    for (term, phi) in terms.iter().zip(acc.phi.iter_mut()) {
        *phi = update(term, *phi);
    }
    acc.last_time = t_n;
    acc.last_value = f_n;
    acc.prev_step = dt;
    Ok(acc)
}

/// Evaluate the fractional integral over the whole grid with the fast
/// recursion. Every grid step must be at least `delta_guard`, which in turn
/// must not undercut the exponential sum's validity lower end.
pub fn evaluate_fast(
    problem: &FractionalProblem,
    grid: &TimeGrid,
    expsum: &ExpSumApproximation,
    delta_guard: f64,
) -> Result<EvaluationTrace> {
    if grid.first() != problem.a() {
        return Err(Error::Config(format!(
            "grid must start at a = {}, got {}",
            problem.a(),
            grid.first()
        )));
    }
    if grid.last() > problem.b() {
        return Err(Error::Config(format!(
            "grid ends at {} beyond b = {}",
            grid.last(),
            problem.b()
        )));
    }
    if !(delta_guard > 0.0) {
        return Err(Error::Config(format!(
            "delta guard must be positive, got {delta_guard}"
        )));
    }
    for n in 1..grid.len() {
        let step = grid.step(n);
        if step < delta_guard {
            return Err(Error::Config(format!(
                "grid step {n} has width {step}, below the kernel validity bound {delta_guard}"
            )));
        }
    }
    let clock = Instant::now();
    let order = problem.order();
    let points = grid.points();
    let mut values = Vec::with_capacity(points.len());
    values.push(0.0);

    let f_1 = problem.source().eval(points[1])?;
    values.push(local_weight(order, grid.step(1))? * f_1);
    let mut acc = HistoryAccumulator::init(expsum, points[0], points[1], f_1)?;
    for (n, &t_n) in points.iter().enumerate().skip(2) {
        let f_n = problem.source().eval(t_n)?;
        acc = advance(acc, t_n, f_n)?;
        values.push(local_weight(order, grid.step(n))? * f_n + acc.history_sum());
    }

    let term_count = expsum.len();
    Ok(EvaluationTrace::new(
        grid.clone(),
        values,
        "expsum",
        term_count,
        term_count,
        clock.elapsed().as_secs_f64(),
    ))
}
