//! The diffusive auxiliary function and its A-stable time steppers.
//!
//! The fractional integral is represented as an integral over a family of
//! scalar states, one per transformed variable r. Each state obeys a linear
//! first-order ODE with decay rate e^r and forcing c_alpha e^{(1-alpha) r} f(t),
//! starting from zero. Rates span many orders of magnitude across the node
//! family, so only A-stable one-step methods are admissible; backward Euler
//! and the trapezoidal rule are provided. All update formulas are evaluated in
//! a rearranged form whose intermediates stay bounded by c_alpha * sup|f| for
//! arbitrarily large |r|.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::problem::{FractionalOrder, FractionalProblem, SourceFunction};
use crate::quadrature::adaptive_simpson;
use crate::special::c_alpha;

/// Minimum node count before node updates are farmed out to rayon.
/// Below this the per-step work is a few hundred flops and fork-join
/// overhead dominates.
#[cfg(feature = "parallel")]
pub(crate) const PAR_NODE_THRESHOLD: usize = 4096;

/// One diffusive node: the transformed variable r plus cached update
/// coefficients.
///
/// For r <= 0 the cached pair is (e^r, c_alpha e^{(1-alpha) r}); for r > 0 the
/// update is algebraically divided by e^r and the pair becomes
/// (e^{-r}, c_alpha e^{-alpha r}). Every cached value is then <= c_alpha
/// regardless of |r|, which is what keeps the steppers overflow-free. r itself
/// is retained, so the node is always recoverable in logarithmic form even
/// where the cached exponentials are subnormal or flushed to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusiveNode {
    r: f64,
    /// e^r (r <= 0) or e^{-r} (r > 0).
    rate_term: f64,
    /// c_alpha e^{(1-alpha) r} (r <= 0) or c_alpha e^{-alpha r} (r > 0),
    /// optionally damped by e^{-window e^r} for history nodes.
    force_term: f64,
}

impl DiffusiveNode {
    pub fn new(r: f64, order: FractionalOrder) -> Self {
        Self::with_forcing_damping(r, order, 0.0)
    }

    /// Node whose forcing carries an extra factor e^{-window e^r}, as used by
    /// the delayed history equation.
    pub fn with_forcing_damping(r: f64, order: FractionalOrder, window: f64) -> Self {
        let c = c_alpha(order);
        let alpha = order.alpha();
        // e^{-window e^r}: exp overflow of e^r drives this to exact zero,
        // which is also the correct limit.
        let damping = if window == 0.0 {
            1.0
        } else {
            (-window * r.exp()).exp()
        };
        if r <= 0.0 {
            Self {
                r,
                rate_term: r.exp(),
                force_term: c * ((1.0 - alpha) * r).exp() * damping,
            }
        } else {
            Self {
                r,
                rate_term: (-r).exp(),
                force_term: c * (-alpha * r).exp() * damping,
            }
        }
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Backward Euler update of one node value.
    ///
    /// r <= 0:  (v + h F f) / (1 + h E)          with E = e^r
    /// r >  0:  (v E' + h F' f) / (E' + h)       with E' = e^{-r}
    pub(crate) fn euler_update(&self, value: f64, h: f64, f_next: f64) -> f64 {
        if self.r <= 0.0 {
            (value + h * self.force_term * f_next) / (1.0 + h * self.rate_term)
        } else {
            (value * self.rate_term + h * self.force_term * f_next) / (self.rate_term + h)
        }
    }

    /// Trapezoidal update of one node value; `f_sum` is f(t_next) + f(t_prev).
    ///
    /// r <= 0:  ((1 - h/2 E) v + h/2 F f_sum) / (1 + h/2 E)
    /// r >  0:  ((E' - h/2) v + h/2 F' f_sum) / (E' + h/2)
    pub(crate) fn trapezoidal_update(&self, value: f64, h: f64, f_sum: f64) -> f64 {
        let hh = 0.5 * h;
        if self.r <= 0.0 {
            ((1.0 - hh * self.rate_term) * value + hh * self.force_term * f_sum)
                / (1.0 + hh * self.rate_term)
        } else {
            ((self.rate_term - hh) * value + hh * self.force_term * f_sum)
                / (self.rate_term + hh)
        }
    }
}

/// A family of diffusive nodes with their current values.
///
/// Values are all zero at the start time; a stepper advances every node to a
/// common new time. Node updates within one step are independent.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusiveState {
    nodes: Vec<DiffusiveNode>,
    values: Vec<f64>,
    time: f64,
}

impl DiffusiveState {
    /// Fresh state at `start_time` with all values zero.
    pub fn new(nodes: Vec<DiffusiveNode>, start_time: f64) -> Self {
        let values = vec![0.0; nodes.len()];
        Self {
            nodes,
            values,
            time: start_time,
        }
    }

    pub fn nodes(&self) -> &[DiffusiveNode] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn current_time(&self) -> f64 {
        self.time
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn check_step(&self, problem: &FractionalProblem, t_next: f64) -> Result<f64> {
        if !(t_next > self.time) {
            return Err(Error::Argument(format!(
                "step target {t_next} does not advance past {}",
                self.time
            )));
        }
        if t_next > problem.b() {
            return Err(Error::Argument(format!(
                "step target {t_next} exceeds the right endpoint {}",
                problem.b()
            )));
        }
        Ok(t_next - self.time)
    }

    pub(crate) fn advance_euler(mut self, t_next: f64, h: f64, f_next: f64) -> Self {
        let nodes = &self.nodes;
        update_values(nodes, &mut self.values, |node, v| {
            node.euler_update(v, h, f_next)
        });
        self.time = t_next;
        self
    }

    pub(crate) fn advance_trapezoidal(mut self, t_next: f64, h: f64, f_sum: f64) -> Self {
        let nodes = &self.nodes;
        update_values(nodes, &mut self.values, |node, v| {
            node.trapezoidal_update(v, h, f_sum)
        });
        self.time = t_next;
        self
    }
}

fn update_values<F>(nodes: &[DiffusiveNode], values: &mut [f64], update: F)
where
    F: Fn(&DiffusiveNode, f64) -> f64 + Sync,
{
    #[cfg(feature = "parallel")]
    if nodes.len() >= PAR_NODE_THRESHOLD {
        nodes
            .par_iter()
            .zip(values.par_iter_mut())
            .for_each(|(node, v)| *v = update(node, *v));
        return;
    }
    for (node, v) in nodes.iter().zip(values.iter_mut()) {
        *v = update(node, *v);
    }
}

/// Advance every node by one backward Euler step to `t_next`.
pub fn step_backward_euler(
    state: DiffusiveState,
    problem: &FractionalProblem,
    t_next: f64,
) -> Result<DiffusiveState> {
    let h = state.check_step(problem, t_next)?;
    let f_next = problem.source().eval(t_next)?;
    Ok(state.advance_euler(t_next, h, f_next))
}

/// Advance every node by one trapezoidal step to `t_next`.
pub fn step_trapezoidal(
    state: DiffusiveState,
    problem: &FractionalProblem,
    t_next: f64,
) -> Result<DiffusiveState> {
    let h = state.check_step(problem, t_next)?;
    let f_sum = problem.source().eval(t_next)? + problem.source().eval(state.time)?;
    Ok(state.advance_trapezoidal(t_next, h, f_sum))
}

/// Reference evaluation of the diffusive integrand phi(t, r).
///
/// Constant forcing uses the closed form
/// c_alpha e^{-alpha r} (1 - e^{-(t-a) e^r}); anything else is integrated by
/// adaptive quadrature at tolerance 1e-12 (after substituting u = (t-tau) e^r
/// for r > 0 so the boundary layer at tau = t never has to be resolved in tau).
pub fn phi_reference(problem: &FractionalProblem, t: f64, r: f64) -> Result<f64> {
    if !(t >= problem.a() && t <= problem.b()) {
        return Err(Error::Argument(format!(
            "t = {t} outside [{}, {}]",
            problem.a(),
            problem.b()
        )));
    }
    let order = problem.order();
    let alpha = order.alpha();
    let c = c_alpha(order);
    let elapsed = t - problem.a();
    if elapsed == 0.0 {
        return Ok(0.0);
    }
    if let SourceFunction::Constant(value) = problem.source() {
        let x = elapsed * r.exp();
        // for tiny x, 1 - e^{-x} ~ x avoids inf * 0 once e^{-alpha r} overflows
        if x < 1e-8 {
            return Ok(c * value * elapsed * ((1.0 - alpha) * r).exp() * (1.0 - 0.5 * x));
        }
        return Ok(c * value * (-alpha * r).exp() * (-(-x).exp_m1()));
    }
    let tol = 1e-13;
    if r <= 0.0 {
        // kernel e^{-(t-tau) e^r} is mild here; integrate in tau directly
        let rate = r.exp();
        let f = problem.source();
        let integrand =
            |tau: f64| (-(t - tau) * rate).exp() * f.eval(tau).unwrap_or(f64::NAN);
        let integral = adaptive_simpson(&integrand, problem.a(), t, tol);
        Ok(c * ((1.0 - alpha) * r).exp() * integral)
    } else {
        // substitute u = (t - tau) e^r; the integrand decays like e^{-u}
        let inv_rate = (-r).exp();
        let upper = (elapsed * r.exp()).min(45.0);
        let f = problem.source();
        let integrand = |u: f64| (-u).exp() * f.eval(t - u * inv_rate).unwrap_or(f64::NAN);
        let integral = adaptive_simpson(&integrand, 0.0, upper, tol);
        Ok(c * (-alpha * r).exp() * integral)
    }
}
