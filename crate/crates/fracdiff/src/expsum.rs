//! Exponential-sum compression of the convolution kernel.
//!
//! The kernel K(t) = Gamma(1-alpha) t^{alpha-1} has the integral representation
//! int e^{(1-alpha) r} e^{-t e^r} dr over the whole real line; a trapezoidal
//! discretization with step `rho_step` turns it into a sum of decaying
//! exponentials with weights rho_step * e^{(1-alpha) n rho_step} and rates
//! e^{n rho_step}. Truncating the sum to n in [-M, N] is controlled by upper
//! incomplete gamma tail bounds, valid on a compact range [delta, t_max] of
//! kernel lags.

use crate::error::{Error, Result};
use crate::problem::FractionalOrder;
use crate::special::{gamma, lower_incomplete_gamma, upper_incomplete_gamma};

/// One decaying exponential: weight * e^{-rate * t}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpSumTerm {
    pub weight: f64,
    pub rate: f64,
}

/// A finite exponential-sum approximation of the kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpSumApproximation {
    order: FractionalOrder,
    rho_step: f64,
    lower_count: usize,
    upper_count: usize,
    terms: Vec<ExpSumTerm>,
}

impl ExpSumApproximation {
    pub fn order(&self) -> FractionalOrder {
        self.order
    }

    /// Trapezoidal step of the underlying integral discretization.
    pub fn rho_step(&self) -> f64 {
        self.rho_step
    }

    /// M: number of terms kept below n = 0.
    pub fn lower_count(&self) -> usize {
        self.lower_count
    }

    /// N: number of terms kept above n = 0.
    pub fn upper_count(&self) -> usize {
        self.upper_count
    }

    /// Terms in ascending rate order (n = -M ..= N).
    pub fn terms(&self) -> &[ExpSumTerm] {
        &self.terms
    }

    /// Total term count M + N + 1.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Tail bounds for the discarded terms of a truncated exponential sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationBound {
    /// Bound on the discarded fast terms (n > N).
    pub upper_tail: f64,
    /// Bound on the discarded slow terms (n < -M).
    pub lower_tail: f64,
    /// Whether t e^{N rho} >= 1 - alpha >= t e^{-M rho} holds, the hypothesis
    /// under which the bounds are proven.
    pub condition_satisfied: bool,
}

/// Build the truncated exponential sum with M + N + 1 terms.
pub fn build_expsum(
    order: FractionalOrder,
    rho_step: f64,
    lower_count: usize,
    upper_count: usize,
) -> Result<ExpSumApproximation> {
    if !(rho_step.is_finite() && rho_step > 0.0) {
        return Err(Error::Argument(format!(
            "rho_step must be positive, got {rho_step}"
        )));
    }
    let one_minus_alpha = order.complement();
    let m = lower_count as i64;
    let n = upper_count as i64;
    let mut terms = Vec::with_capacity((m + n + 1) as usize);
    for k in -m..=n {
        let exponent = k as f64 * rho_step;
        let term = ExpSumTerm {
            weight: rho_step * (one_minus_alpha * exponent).exp(),
            rate: exponent.exp(),
        };
        if !(term.weight.is_finite() && term.rate.is_finite() && term.weight > 0.0)
            || term.rate == 0.0
        {
            return Err(Error::Argument(format!(
                "term n = {k} leaves the representable range at rho_step = {rho_step}"
            )));
        }
        terms.push(term);
    }
    Ok(ExpSumApproximation {
        order,
        rho_step,
        lower_count,
        upper_count,
        terms,
    })
}

/// The exact kernel K(t) = Gamma(1-alpha) t^{alpha-1}, t > 0.
pub fn kernel_exact(order: FractionalOrder, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("kernel requires t > 0, got {t}")));
    }
    Ok(gamma(order.complement())? * t.powf(order.alpha() - 1.0))
}

/// Evaluate the exponential sum at lag t >= 0.
///
/// Terms are accumulated in ascending n; all terms are positive, so the order
/// only matters for magnitude spreading and plain ascending order is adequate.
/// Rates large enough that e^{-rate t} underflows contribute exact zeros.
pub fn eval_expsum(approx: &ExpSumApproximation, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Argument(format!("need t >= 0, got {t}")));
    }
    Ok(approx
        .terms
        .iter()
        .map(|term| term.weight * (-term.rate * t).exp())
        .sum())
}

// t^{alpha-1} gamma_lower(1-alpha, t e^{-m rho}), evaluated through the
// series (the difference Gamma(s) - Gamma(s, x) cancels catastrophically for
// small x) and through its leading term in log space once x itself would
// underflow.
fn lower_tail_bound(order: FractionalOrder, rho: f64, m: usize, t: f64) -> Result<f64> {
    let s = order.complement();
    let prefactor = t.powf(order.alpha() - 1.0);
    let ln_x = t.ln() - m as f64 * rho;
    if ln_x < -690.0 {
        // gamma_lower(s, x) = x^s / s to relative accuracy x
        return Ok(prefactor * (s * ln_x).exp() / s);
    }
    Ok(prefactor * lower_incomplete_gamma(s, ln_x.exp())?)
}

/// Incomplete-gamma bounds on both truncation tails at lag t > 0.
pub fn truncation_bounds(approx: &ExpSumApproximation, t: f64) -> Result<TruncationBound> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!(
            "truncation bounds require t > 0, got {t}"
        )));
    }
    let s = approx.order.complement();
    let rho = approx.rho_step;
    let prefactor = t.powf(approx.order.alpha() - 1.0);
    let x_upper = t * (approx.upper_count as f64 * rho).exp();
    let x_lower = t * (-(approx.lower_count as f64) * rho).exp();
    let upper_tail = prefactor * upper_incomplete_gamma(s, x_upper)?;
    let lower_tail = lower_tail_bound(approx.order, rho, approx.lower_count, t)?;
    Ok(TruncationBound {
        upper_tail,
        lower_tail,
        condition_satisfied: x_upper >= s && s >= x_lower,
    })
}

const SELECT_SCAN_LIMIT: usize = 10_000;

/// Pick the smallest M, N whose tail bounds stay below `tol` on [delta, t_max].
///
/// The upper tail is worst at small lags and is checked at t = delta; the
/// lower tail is checked at t = t_max. The bounds' validity condition is
/// enforced at the same endpoints, which by monotonicity covers the whole
/// range.
pub fn select_truncation(
    order: FractionalOrder,
    rho_step: f64,
    delta: f64,
    t_max: f64,
    tol: f64,
) -> Result<(usize, usize)> {
    if !(rho_step.is_finite() && rho_step > 0.0) {
        return Err(Error::Argument(format!(
            "rho_step must be positive, got {rho_step}"
        )));
    }
    if !(delta > 0.0 && delta < t_max && t_max.is_finite()) {
        return Err(Error::Argument(format!(
            "need 0 < delta < t_max, got delta={delta}, t_max={t_max}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tol must be positive, got {tol}")));
    }
    let s = order.complement();

    let mut upper_count = None;
    let mut best_upper = f64::INFINITY;
    for n in 0..=SELECT_SCAN_LIMIT {
        let x = delta * (n as f64 * rho_step).exp();
        if x < s {
            continue;
        }
        let bound = delta.powf(order.alpha() - 1.0) * upper_incomplete_gamma(s, x)?;
        best_upper = best_upper.min(bound);
        if bound <= tol {
            upper_count = Some(n);
            break;
        }
    }
    let upper_count = upper_count.ok_or_else(|| {
        Error::Numerical(format!(
            "upper tail cannot reach tol={tol} within {SELECT_SCAN_LIMIT} terms \
             (best bound {best_upper} at t={delta})"
        ))
    })?;

    let mut lower_count = None;
    let mut best_lower = f64::INFINITY;
    for m in 0..=SELECT_SCAN_LIMIT {
        // rates e^{-m rho} below this underflow and the sum cannot be built
        if m as f64 * rho_step > 745.0 {
            break;
        }
        if t_max * (-(m as f64) * rho_step).exp() > s {
            continue;
        }
        let bound = lower_tail_bound(order, rho_step, m, t_max)?;
        best_lower = best_lower.min(bound);
        if bound <= tol {
            lower_count = Some(m);
            break;
        }
    }
    let lower_count = lower_count.ok_or_else(|| {
        Error::Numerical(format!(
            "lower tail cannot reach tol={tol} with representable rates \
             (best bound {best_lower} at t={t_max})"
        ))
    })?;

    Ok((lower_count, upper_count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn order(alpha: f64) -> FractionalOrder {
        FractionalOrder::new(alpha).unwrap()
    }

    // direct summation of the discarded terms, the brute-force check of the bounds
    fn brute_tails(approx: &ExpSumApproximation, t: f64, extra: i64) -> (f64, f64) {
        let s = approx.order().complement();
        let rho = approx.rho_step();
        let n = approx.upper_count() as i64;
        let m = approx.lower_count() as i64;
        let term = |k: i64| {
            let e = k as f64 * rho;
            rho * (s * e).exp() * (-(e.exp()) * t).exp()
        };
        let upper: f64 = ((n + 1)..=(n + extra)).map(term).sum();
        let lower: f64 = ((-m - extra)..=(-m - 1)).map(term).sum();
        (upper, lower)
    }

    #[test]
    fn build_term_values() {
        let a = build_expsum(order(0.5), 1.0, 0, 0).unwrap();
        assert_eq!(a.len(), 1);
        assert_relative_eq!(a.terms()[0].weight, 1.0, max_relative = 1e-15);
        assert_relative_eq!(a.terms()[0].rate, 1.0, max_relative = 1e-15);

        let a = build_expsum(order(0.5), 0.5, 2, 2).unwrap();
        assert_eq!(a.len(), 5);
        // n = 2 term
        assert_relative_eq!(a.terms()[4].weight, 0.82436063535006407, max_relative = 1e-14);
        assert_relative_eq!(a.terms()[4].rate, std::f64::consts::E, max_relative = 1e-14);

        let a = build_expsum(order(0.25), 0.5, 2, 0).unwrap();
        assert_relative_eq!(a.terms()[0].weight, 0.23618327637050735, max_relative = 1e-14);
        assert_relative_eq!(a.terms()[0].rate, 0.36787944117144232, max_relative = 1e-14);
    }

    #[test]
    fn build_rejects_bad_step() {
        assert!(build_expsum(order(0.5), 0.0, 1, 1).is_err());
        assert!(build_expsum(order(0.5), -1.0, 1, 1).is_err());
    }

    #[test]
    fn rates_strictly_increasing_weights_positive() {
        let a = build_expsum(order(0.75), 0.3, 40, 40).unwrap();
        assert!(a.terms().windows(2).all(|w| w[1].rate > w[0].rate));
        assert!(a.terms().iter().all(|t| t.weight > 0.0 && t.rate > 0.0));
    }

    #[test]
    fn kernel_exact_values() {
        assert_relative_eq!(
            kernel_exact(order(0.5), 1.0).unwrap(),
            1.7724538509055160,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            kernel_exact(order(0.5), 4.0).unwrap(),
            0.88622692545275801,
            max_relative = 1e-13
        );
        assert!(kernel_exact(order(0.5), 0.0).is_err());
        assert!(kernel_exact(order(0.5), -1.0).is_err());
    }

    #[test]
    fn kernel_reflection_consistency() {
        // c_alpha * K(t) = t^{alpha-1} / Gamma(alpha)
        let o = order(0.25);
        let lhs = crate::special::c_alpha(o) * kernel_exact(o, 2.0).unwrap();
        assert_relative_eq!(lhs, 0.16400097433343823, max_relative = 1e-13);
    }

    #[test]
    fn eval_single_term_at_zero() {
        let a = build_expsum(order(0.5), 1.0, 0, 0).unwrap();
        assert_relative_eq!(eval_expsum(&a, 0.0).unwrap(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn eval_accuracy_against_exact_kernel() {
        // M = N = 60 at rho = 0.25 is lower-tail limited near 6e-4
        let a = build_expsum(order(0.5), 0.25, 60, 60).unwrap();
        let v = eval_expsum(&a, 1.0).unwrap();
        let exact = kernel_exact(order(0.5), 1.0).unwrap();
        let rel = ((v - exact) / exact).abs();
        assert_relative_eq!(rel, 5.8589567760491235e-4, max_relative = 1e-6);
        // widening the slow end to M = 120 reaches 1e-6
        let a = build_expsum(order(0.5), 0.25, 120, 60).unwrap();
        let v = eval_expsum(&a, 1.0).unwrap();
        assert!(((v - exact) / exact).abs() <= 1e-6);
    }

    #[test]
    fn eval_huge_lag_is_tiny_and_positive() {
        let a = build_expsum(order(0.5), 0.25, 30, 30).unwrap();
        let v = eval_expsum(&a, 1e6).unwrap();
        let slowest = a.terms()[0];
        let cap = a.len() as f64 * slowest.weight * (-slowest.rate * 1e6).exp();
        assert!(v >= 0.0 && v <= cap);
    }

    #[test]
    fn truncation_bound_example() {
        let a = build_expsum(order(0.5), 0.5, 3, 2).unwrap();
        let b = truncation_bounds(&a, 1.0).unwrap();
        assert!(b.condition_satisfied);
        // upper tail bound is Gamma(1/2, e) here
        assert_relative_eq!(b.upper_tail, 0.034951776179858913, max_relative = 1e-12);
        let (brute_up, brute_lo) = brute_tails(&a, 1.0, 500);
        assert!(brute_up <= b.upper_tail);
        assert!(brute_lo <= b.lower_tail);
    }

    #[test]
    fn truncation_condition_predicate() {
        // t e^{-M rho} > 1 - alpha makes the condition fail; bounds still returned
        let a = build_expsum(order(0.5), 0.5, 0, 5).unwrap();
        let b = truncation_bounds(&a, 1.0).unwrap();
        assert!(!b.condition_satisfied);
        assert!(b.upper_tail >= 0.0 && b.lower_tail >= 0.0);
    }

    #[test]
    fn truncation_tail_vanishes_for_large_n() {
        let a = build_expsum(order(0.5), 0.5, 3, 100).unwrap();
        let b = truncation_bounds(&a, 1.0).unwrap();
        assert!(b.upper_tail < 1e-300);
    }

    #[test]
    fn truncation_rejects_nonpositive_t() {
        let a = build_expsum(order(0.5), 0.5, 3, 3).unwrap();
        assert!(truncation_bounds(&a, 0.0).is_err());
    }

    #[test]
    fn select_minimal_when_tolerance_is_loose() {
        // tol so large that only the condition inequalities bind
        let (m, n) = select_truncation(order(0.5), 0.5, 0.1, 1.0, 10.0).unwrap();
        // smallest n with 0.1 e^{n/2} >= 0.5 is n = 4; smallest m with e^{-m/2} <= 0.5 is m = 2
        assert_eq!((m, n), (2, 4));
    }

    #[test]
    fn select_then_verify_bounds_post_hoc() {
        let o = order(0.5);
        let (m, n) = select_truncation(o, 0.25, 1e-2, 1.0, 1e-8).unwrap();
        let a = build_expsum(o, 0.25, m, n).unwrap();
        let at_delta = truncation_bounds(&a, 1e-2).unwrap();
        let at_tmax = truncation_bounds(&a, 1.0).unwrap();
        assert!(at_delta.condition_satisfied && at_tmax.condition_satisfied);
        assert!(at_delta.upper_tail <= 1e-8);
        assert!(at_tmax.lower_tail <= 1e-8);
    }

    #[test]
    fn select_rejects_bad_ranges() {
        assert!(select_truncation(order(0.5), 0.25, 1.0, 1.0, 1e-8).is_err());
        assert!(select_truncation(order(0.5), 0.25, 2.0, 1.0, 1e-8).is_err());
        assert!(select_truncation(order(0.5), 0.25, 0.1, 1.0, 0.0).is_err());
    }

    #[test]
    fn halving_rho_improves_kernel_accuracy_tenfold() {
        // coarse truncation chosen so tails sit far below the discretization
        // error, then the step is halved with the r-range held fixed
        let o = order(0.5);
        let (m, n) = select_truncation(o, 0.5, 1e-2, 1.0, 1e-12).unwrap();
        let coarse = build_expsum(o, 0.5, m, n).unwrap();
        let fine = build_expsum(o, 0.25, 2 * m, 2 * n).unwrap();
        let max_rel = |a: &ExpSumApproximation| {
            let mut worst: f64 = 0.0;
            for i in 0..200 {
                let t = 1e-2 * (100.0f64).powf(i as f64 / 199.0);
                let exact = kernel_exact(o, t).unwrap();
                let rel = ((eval_expsum(a, t).unwrap() - exact) / exact).abs();
                worst = worst.max(rel);
            }
            worst
        };
        let coarse_err = max_rel(&coarse);
        let fine_err = max_rel(&fine);
        assert!(
            coarse_err >= 10.0 * fine_err,
            "coarse {coarse_err}, fine {fine_err}"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn eval_positive_and_decreasing(
            alpha in 0.05f64..0.95,
            rho in 0.1f64..1.0,
            m in 0usize..30,
            n in 0usize..30,
        ) {
            let a = build_expsum(order(alpha), rho, m, n).unwrap();
            let mut prev = f64::INFINITY;
            for i in 0..30 {
                let t = 1e-3 * (10.0f64).powf(i as f64 / 7.0);
                let v = eval_expsum(&a, t).unwrap();
                prop_assert!(v > 0.0);
                prop_assert!(v < prev);
                prev = v;
            }
        }

        #[test]
        fn tails_never_exceed_bounds_when_condition_holds(
            alpha in 0.1f64..0.9,
            rho in 0.2f64..1.0,
            m in 1usize..40,
            n in 1usize..40,
            t in 0.05f64..2.0,
        ) {
            let a = build_expsum(order(alpha), rho, m, n).unwrap();
            let b = truncation_bounds(&a, t).unwrap();
            if b.condition_satisfied {
                let (brute_up, brute_lo) = brute_tails(&a, t, 500);
                prop_assert!(brute_up <= b.upper_tail * (1.0 + 1e-9) + 1e-300);
                prop_assert!(brute_lo <= b.lower_tail * (1.0 + 1e-9) + 1e-300);
            }
        }
    }
}
