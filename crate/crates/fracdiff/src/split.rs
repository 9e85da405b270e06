//! Local/history splitting of the fractional integral.
//!
//! For a window width h, I = L + H where L integrates the singular kernel
//! exactly over the recent window [t-h, t] (product integration against the
//! piecewise-linear interpolant of f) and H carries everything older. H has
//! its own diffusive representation whose states mu obey the same linear ODE
//! as the full-integral states, except the forcing is sampled at the delayed
//! time t - h and damped by e^{-h e^r} - a double-exponential kill-off in r
//! that the quadrature inherits for free.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use std::time::Instant;

use crate::diffusive::{DiffusiveNode, DiffusiveState};
use crate::error::{Error, Result};
use crate::laguerre::{build_rule, GaussLaguerreRule, SteppingMethod};
use crate::oracle::pow_diff;
use crate::problem::{FractionalProblem, SourceFunction, TimeGrid};
use crate::quadrature::adaptive_simpson;
use crate::special::{c_alpha, gamma};
use crate::trace::EvaluationTrace;

/// Number of uniform product-integration panels inside the local window.
const LOCAL_PANELS: usize = 128;

/// Width of the local window, validated against the problem interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryWindow(f64);

impl HistoryWindow {
    /// Requires 0 < width < b - a.
    pub fn for_problem(width: f64, problem: &FractionalProblem) -> Result<Self> {
        let span = problem.b() - problem.a();
        if !(width.is_finite() && width > 0.0 && width < span) {
            return Err(Error::Argument(format!(
                "window must lie in (0, {span}), got {width}"
            )));
        }
        Ok(Self(width))
    }

    pub fn width(self) -> f64 {
        self.0
    }
}

/// Exact product integration of the local part
/// L(t) = 1/Gamma(alpha) int_{t-h}^t (t-tau)^{alpha-1} f(tau) dtau
/// against the piecewise-linear interpolant of f on the window.
///
/// The window is subdivided into uniform panels (plus the breakpoints of a
/// sampled source), so the result is exact for constant, linear and sampled
/// piecewise-linear forcing.
pub fn local_part(problem: &FractionalProblem, window: HistoryWindow, t: f64) -> Result<f64> {
    let w = window.width();
    if t - w < problem.a() {
        return Err(Error::Argument(format!(
            "window {w} reaches before a = {} at t = {t}",
            problem.a()
        )));
    }
    if t > problem.b() {
        return Err(Error::Argument(format!(
            "t = {t} beyond b = {}",
            problem.b()
        )));
    }
    let alpha = problem.order().alpha();
    let lo = t - w;
    let mut breakpoints: Vec<f64> = (0..=LOCAL_PANELS)
        .map(|i| lo + w * i as f64 / LOCAL_PANELS as f64)
        .collect();
    if let SourceFunction::Sampled { times, .. } = problem.source() {
        for &s in times {
            if s > lo && s < t {
                breakpoints.push(s);
            }
        }
        breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breakpoints.dedup();
    }
    let mut acc = 0.0;
    let mut f_prev = problem.source().eval(breakpoints[0])?;
    for k in 1..breakpoints.len() {
        let tau_prev = breakpoints[k - 1];
        let tau = breakpoints[k];
        let f_cur = problem.source().eval(tau)?;
        let a_k = t - tau_prev;
        let b_k = t - tau;
        let m0 = pow_diff(a_k, b_k, alpha) / alpha;
        let m1c = a_k * m0 - pow_diff(a_k, b_k, alpha + 1.0) / (alpha + 1.0);
        let slope = (f_cur - f_prev) / (tau - tau_prev);
        acc += f_prev * m0 + slope * m1c;
        f_prev = f_cur;
    }
    Ok(acc / gamma(alpha)?)
}

/// Diffusive states of the history part: the same two transformed
/// Gauss-Laguerre node families as the full-integral scheme, with the
/// window damping folded into each node's forcing coefficient.
#[derive(Debug, Clone)]
pub struct HistoryDiffusiveState {
    window: HistoryWindow,
    left: DiffusiveState,
    right: DiffusiveState,
}

impl HistoryDiffusiveState {
    /// Both families zeroed at t = a + window.
    pub fn init(
        rule: &GaussLaguerreRule,
        problem: &FractionalProblem,
        window: HistoryWindow,
    ) -> Self {
        let order = problem.order();
        let w = window.width();
        let damped = |r: f64| DiffusiveNode::with_forcing_damping(r, order, w);
        let left_nodes: Vec<DiffusiveNode> = rule
            .nodes()
            .iter()
            .map(|&x| damped(-x / order.complement()))
            .collect();
        let right_nodes: Vec<DiffusiveNode> = rule
            .nodes()
            .iter()
            .map(|&x| damped(x / order.alpha()))
            .collect();
        let start = problem.a() + w;
        Self {
            window,
            left: DiffusiveState::new(left_nodes, start),
            right: DiffusiveState::new(right_nodes, start),
        }
    }

    pub fn window(&self) -> HistoryWindow {
        self.window
    }

    pub fn left(&self) -> &DiffusiveState {
        &self.left
    }

    pub fn right(&self) -> &DiffusiveState {
        &self.right
    }

    pub fn current_time(&self) -> f64 {
        self.left.current_time()
    }
}

/// Advance the history states to `t_next`, sampling the forcing at the
/// delayed times t - window.
pub fn history_step(
    state: HistoryDiffusiveState,
    problem: &FractionalProblem,
    t_next: f64,
    method: SteppingMethod,
) -> Result<HistoryDiffusiveState> {
    let t_prev = state.current_time();
    if !(t_next > t_prev) {
        return Err(Error::Argument(format!(
            "step target {t_next} does not advance past {t_prev}"
        )));
    }
    if t_next > problem.b() {
        return Err(Error::Argument(format!(
            "step target {t_next} exceeds b = {}",
            problem.b()
        )));
    }
    let w = state.window.width();
    if t_next - w < problem.a() {
        return Err(Error::Argument(format!(
            "delayed sample {} lies before a = {}",
            t_next - w,
            problem.a()
        )));
    }
    let h = t_next - t_prev;
    let f_next = problem.source().eval(t_next - w)?;
    Ok(match method {
        SteppingMethod::BackwardEuler => HistoryDiffusiveState {
            window: state.window,
            left: state.left.advance_euler(t_next, h, f_next),
            right: state.right.advance_euler(t_next, h, f_next),
        },
        SteppingMethod::Trapezoidal => {
            let f_sum = f_next + problem.source().eval(t_prev - w)?;
            HistoryDiffusiveState {
                window: state.window,
                left: state.left.advance_trapezoidal(t_next, h, f_sum),
                right: state.right.advance_trapezoidal(t_next, h, f_sum),
            }
        }
    })
}

/// Quadrature of the history part from the advanced states.
pub fn history_evaluate(
    state: &HistoryDiffusiveState,
    rule: &GaussLaguerreRule,
    problem: &FractionalProblem,
) -> f64 {
    let order = problem.order();
    let inv_left = 1.0 / order.complement();
    let inv_right = 1.0 / order.alpha();
    rule.scaled_weights()
        .iter()
        .zip(state.left.values().iter().zip(state.right.values()))
        .map(|(&sw, (&mu_left, &mu_right))| sw * (inv_left * mu_left + inv_right * mu_right))
        .sum()
}

/// Evaluate I = L + H over a grid of times at least a + window.
///
/// The history states start from zero at a + window; when the first grid
/// point lies beyond it, they are advanced there in a single step.
pub fn split_evaluate(
    problem: &FractionalProblem,
    grid: &TimeGrid,
    window: HistoryWindow,
    lambda: usize,
    method: SteppingMethod,
) -> Result<EvaluationTrace> {
    let start = problem.a() + window.width();
    if grid.first() < start {
        return Err(Error::Config(format!(
            "grid starts at {} before a + window = {start}",
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
    let rule = build_rule(lambda)?;
    let mut state = HistoryDiffusiveState::init(&rule, problem, window);
    let state_count = state.left.len() + state.right.len();

    // same startup treatment as the full-integral evaluator: the first step
    // away from the zero state is taken with backward Euler so the stiffest
    // nodes do not ring under the trapezoidal rule
    let mut first_step = true;
    let mut history = Vec::with_capacity(grid.len());
    for &t in grid.points() {
        if t > state.current_time() {
            let step_method = if first_step {
                SteppingMethod::BackwardEuler
            } else {
                method
            };
            state = history_step(state, problem, t, step_method)?;
            first_step = false;
        }
        history.push(history_evaluate(&state, &rule, problem));
    }

    let points = grid.points();
    #[cfg(feature = "parallel")]
    let locals: Vec<f64> = points
        .par_iter()
        .map(|&t| local_part(problem, window, t))
        .collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let locals: Vec<f64> = points
        .iter()
        .map(|&t| local_part(problem, window, t))
        .collect::<Result<_>>()?;

    let values: Vec<f64> = locals
        .iter()
        .zip(&history)
        .map(|(l, h)| l + h)
        .collect();
    let tag = match method {
        SteppingMethod::BackwardEuler => "split-euler",
        SteppingMethod::Trapezoidal => "split-trap",
    };
    Ok(EvaluationTrace::new(
        grid.clone(),
        values,
        tag,
        lambda,
        state_count,
        clock.elapsed().as_secs_f64(),
    ))
}

/// Reference evaluation of the history integrand mu(t, window, r).
///
/// Constant forcing uses the closed form
/// c_alpha e^{-alpha r} (e^{-w e^r} - e^{-(t-a) e^r}); otherwise the defining
/// integral is evaluated by adaptive quadrature at tolerance 1e-12.
pub fn mu_reference(
    problem: &FractionalProblem,
    t: f64,
    window: HistoryWindow,
    r: f64,
) -> Result<f64> {
    let w = window.width();
    let a = problem.a();
    if !(t >= a + w && t <= problem.b()) {
        return Err(Error::Argument(format!(
            "t = {t} outside [a + window, b] = [{}, {}]",
            a + w,
            problem.b()
        )));
    }
    let order = problem.order();
    let alpha = order.alpha();
    let c = c_alpha(order);
    if t == a + w {
        return Ok(0.0);
    }
    if let SourceFunction::Constant(value) = problem.source() {
        let x1 = w * r.exp();
        let d = (t - a - w) * r.exp();
        if d < 1e-8 {
            return Ok(c * value * (t - a - w) * ((1.0 - alpha) * r).exp()
                * (-x1).exp()
                * (1.0 - 0.5 * d));
        }
        return Ok(c * value * (-alpha * r).exp() * (-x1).exp() * (-(-d).exp_m1()));
    }
    let tol = 1e-13;
    if r <= 0.0 {
        let rate = r.exp();
        let f = problem.source();
        let integrand = |tau: f64| (-(t - tau) * rate).exp() * f.eval(tau).unwrap_or(f64::NAN);
        let integral = adaptive_simpson(&integrand, a, t - w, tol);
        Ok(c * ((1.0 - alpha) * r).exp() * integral)
    } else {
        let inv_rate = (-r).exp();
        let scale = (-w * r.exp()).exp();
        if scale == 0.0 {
            return Ok(0.0);
        }
        let upper = ((t - a - w) * r.exp()).min(45.0);
        let f = problem.source();
        let integrand =
            |v: f64| (-v).exp() * f.eval(t - w - v * inv_rate).unwrap_or(f64::NAN);
        let integral = adaptive_simpson(&integrand, 0.0, upper, tol);
        Ok(c * (-alpha * r).exp() * scale * integral)
    }
}
