//! Ground truth: analytic monomial solutions and a direct O(P^2)
//! product-integration evaluator.
//!
//! The direct evaluator integrates the singular kernel factor exactly against
//! the piecewise-linear interpolant of f, one interval at a time, so it is
//! exact (to round-off) whenever f is piecewise linear on the grid. That is
//! one interpolation order better than the fast scheme's piecewise-constant
//! interpolant, keeping oracle error out of method comparisons.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use std::time::Instant;

use crate::error::{Error, Result};
use crate::problem::{FractionalOrder, FractionalProblem, TimeGrid};
use crate::special::gamma;
use crate::trace::EvaluationTrace;

/// a^alpha - b^alpha for a >= b >= 0, rewritten with log/expm1 differencing
/// when a and b are close; the naive difference cancels catastrophically on
/// fine grids.
pub(crate) fn pow_diff(a: f64, b: f64, alpha: f64) -> f64 {
    debug_assert!(a >= b && b >= 0.0);
    if b == 0.0 {
        return a.powf(alpha);
    }
    let d = a - b;
    if d < 0.5 * b {
        // a^alpha - b^alpha = b^alpha expm1(alpha log1p(d / b))
        b.powf(alpha) * (alpha * (d / b).ln_1p()).exp_m1()
    } else {
        a.powf(alpha) - b.powf(alpha)
    }
}

/// Closed-form moments of the kernel factor (t_n - tau)^{alpha-1} over the
/// intervals of a grid prefix, for one evaluation time t_n.
#[derive(Debug, Clone)]
pub struct MomentTable {
    /// int_{J_j} (t_n - tau)^{alpha-1} dtau for j = 1..=n
    zeroth: Vec<f64>,
    /// int_{J_j} tau (t_n - tau)^{alpha-1} dtau
    first: Vec<f64>,
}

impl MomentTable {
    /// Build the table for evaluation time `grid.points()[n]`.
    pub fn build(order: FractionalOrder, grid: &TimeGrid, n: usize) -> Self {
        let alpha = order.alpha();
        let points = grid.points();
        let t_n = points[n];
        let mut zeroth = Vec::with_capacity(n);
        let mut first = Vec::with_capacity(n);
        for j in 1..=n {
            // s = t_n - tau runs over [b_j, a_j]
            let a_j = t_n - points[j - 1];
            let b_j = t_n - points[j];
            let m0 = pow_diff(a_j, b_j, alpha) / alpha;
            let m1c = a_j * m0 - pow_diff(a_j, b_j, alpha + 1.0) / (alpha + 1.0);
            zeroth.push(m0);
            first.push(points[j - 1] * m0 + m1c);
        }
        Self { zeroth, first }
    }

    pub fn zeroth(&self) -> &[f64] {
        &self.zeroth
    }

    pub fn first(&self) -> &[f64] {
        &self.first
    }
}

/// Closed form of I^alpha_0 [tau^p](t) = Gamma(p+1)/Gamma(p+1+alpha) t^{p+alpha}.
pub fn analytic_monomial(order: FractionalOrder, p: f64, t: f64) -> Result<f64> {
    if !(p.is_finite() && p >= 0.0) {
        return Err(Error::Domain(format!("exponent must be >= 0, got {p}")));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("need t >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(gamma(p + 1.0)? / gamma(p + 1.0 + order.alpha())? * t.powf(p + order.alpha()))
}

/// Direct product-integration evaluation of the fractional integral over a
/// grid: O(P^2) work, exact for piecewise-linear f.
pub fn direct_integral(problem: &FractionalProblem, grid: &TimeGrid) -> Result<EvaluationTrace> {
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
    let clock = Instant::now();
    let order = problem.order();
    let points = grid.points();
    let samples: Vec<f64> = points
        .iter()
        .map(|&t| problem.source().eval(t))
        .collect::<Result<_>>()?;
    let inv_gamma = 1.0 / gamma(order.alpha())?;

    // moments computed streaming rather than through MomentTable: the hot
    // loop must stay allocation-free to exhibit clean quadratic scaling
    let alpha = order.alpha();
    let value_at = |n: usize| -> f64 {
        if n == 0 {
            return 0.0;
        }
        let t_n = points[n];
        let mut acc = 0.0;
        for j in 1..=n {
            let a_j = t_n - points[j - 1];
            let b_j = t_n - points[j];
            let m0 = pow_diff(a_j, b_j, alpha) / alpha;
            let m1c = a_j * m0 - pow_diff(a_j, b_j, alpha + 1.0) / (alpha + 1.0);
            let slope = (samples[j] - samples[j - 1]) / (points[j] - points[j - 1]);
            acc += samples[j - 1] * m0 + slope * m1c;
        }
        acc * inv_gamma
    };

    #[cfg(feature = "parallel")]
    let values: Vec<f64> = (0..points.len()).into_par_iter().map(value_at).collect();
    #[cfg(not(feature = "parallel"))]
    let values: Vec<f64> = (0..points.len()).map(value_at).collect();

    Ok(EvaluationTrace::new(
        grid.clone(),
        values,
        "oracle",
        0,
        grid.len(),
        clock.elapsed().as_secs_f64(),
    ))
}
