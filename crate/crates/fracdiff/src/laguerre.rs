//! Gauss-Laguerre quadrature over the diffusive variable.
//!
//! The integral over the real line is split at r = 0 and each half is mapped
//! onto [0, inf) with the substitutions r = -s/(1-alpha) and r = s/alpha, so a
//! single Lambda-point Gauss-Laguerre rule integrates both halves. Per node
//! the method carries two diffusive states (one per half), advanced by the
//! shared A-stable steppers; the quadrature summation uses the rescaled
//! weights w_l e^{x_l}, precomputed in log space because both factors can
//! overflow or underflow individually at Lambda = 200.

use std::time::Instant;

use crate::diffusive::{DiffusiveNode, DiffusiveState};
use crate::error::{Error, Result};
use crate::problem::{FractionalOrder, FractionalProblem, TimeGrid};
use crate::trace::EvaluationTrace;

pub const MAX_RULE_ORDER: usize = 200;
const NEWTON_MAX_ITER: usize = 100;

/// Nodes and weights of the Lambda-point Gauss-Laguerre rule for
/// int_0^inf e^{-x} g(x) dx.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLaguerreRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    scaled_weights: Vec<f64>,
}

impl GaussLaguerreRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Strictly increasing positive nodes.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights; the largest-node weights underflow to zero near Lambda = 200,
    /// where only the scaled weights remain meaningful.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// w_l e^{x_l}, the combination the quadrature summation actually uses.
    pub fn scaled_weights(&self) -> &[f64] {
        &self.scaled_weights
    }

    /// Quadrature of int_0^inf e^{-x} g(x) dx.
    pub fn integrate<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }
}

// Laguerre polynomial values (L_{n-1}(x), L_n(x)) by the three-term recurrence
// (k+1) L_{k+1} = (2k+1-x) L_k - k L_{k-1}.
fn laguerre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 1.0;
    let mut cur = 1.0 - x;
    for k in 1..n {
        let next = ((2.0 * k as f64 + 1.0 - x) * cur - k as f64 * prev) / (k as f64 + 1.0);
        prev = cur;
        cur = next;
    }
    (prev, cur)
}

// Double-double scalar for the compensated recurrence. Plain f64 evaluation
// leaves the smallest roots (which carry the largest weights) with ~n*eps
// absolute error, and the weight formula amplifies node error by ~n/x; the
// construction-time cost of carrying ~1e-31 arithmetic here is negligible.
#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn from_f64(a: f64) -> Self {
        Self { hi: a, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Self { hi: s, lo: err }
    }

    fn two_prod(a: f64, b: f64) -> Self {
        let p = a * b;
        let err = a.mul_add(b, -p);
        Self { hi: p, lo: err }
    }

    fn add(self, o: Self) -> Self {
        let s = Self::two_sum(self.hi, o.hi);
        let lo = s.lo + self.lo + o.lo;
        Self::two_sum(s.hi, lo)
    }

    fn sub(self, o: Self) -> Self {
        self.add(Self {
            hi: -o.hi,
            lo: -o.lo,
        })
    }

    fn mul(self, o: Self) -> Self {
        let p = Self::two_prod(self.hi, o.hi);
        let lo = p.lo + self.hi * o.lo + self.lo * o.hi;
        Self::two_sum(p.hi, lo)
    }

    fn div_f64(self, b: f64) -> Self {
        let q1 = self.hi / b;
        let p = Self::two_prod(q1, b);
        let r = (self.hi - p.hi) + (self.lo - p.lo);
        Self::two_sum(q1, r / b)
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

// (L_{n-1}(x), L_n(x)) in compensated arithmetic.
fn laguerre_pair_dd(n: usize, x: f64) -> (Dd, Dd) {
    let mut prev = Dd::from_f64(1.0);
    let mut cur = Dd::two_sum(1.0, -x);
    for k in 1..n {
        let kf = k as f64;
        let coeff = Dd::two_sum(2.0 * kf + 1.0, -x);
        let next = coeff.mul(cur).sub(prev.mul(Dd::from_f64(kf))).div_f64(kf + 1.0);
        prev = cur;
        cur = next;
    }
    (prev, cur)
}

/// Build the Lambda-point rule, 1 <= Lambda <= 200.
///
/// Nodes are the roots of L_Lambda found by safeguarded Newton iteration from
/// the standard initial guesses; weights follow
/// w_l = x_l / ((Lambda+1)^2 L_{Lambda+1}(x_l)^2), assembled in log space.
/// The zeroth and first moments are verified before the rule is returned.
pub fn build_rule(lambda: usize) -> Result<GaussLaguerreRule> {
    if lambda == 0 || lambda > MAX_RULE_ORDER {
        return Err(Error::Argument(format!(
            "rule order must lie in 1..={MAX_RULE_ORDER}, got {lambda}"
        )));
    }
    let n = lambda as f64;
    let mut nodes = Vec::with_capacity(lambda);
    let mut weights = Vec::with_capacity(lambda);
    let mut scaled_weights = Vec::with_capacity(lambda);

    let mut z = 0.0;
    for i in 0..lambda {
        // initial guesses per root index
        if i == 0 {
            z = 3.0 / (1.0 + 2.4 * n);
        } else if i == 1 {
            z += 15.0 / (1.0 + 2.5 * n);
        } else {
            let ai = i as f64 - 1.0;
            z += (1.0 + 2.55 * ai) / (1.9 * ai) * (z - nodes[i - 2]);
        }
        let lower = if i == 0 { 0.0 } else { nodes[i - 1] };
        let mut converged = false;
        let mut last_shift = f64::INFINITY;
        for _ in 0..NEWTON_MAX_ITER {
            let (below, value) = laguerre_pair(lambda, z);
            let deriv = n * (value - below) / z;
            let mut z_next = z - value / deriv;
            if !z_next.is_finite() || z_next <= lower {
                // bisect back toward the admissible side
                z_next = 0.5 * (z + lower);
            }
            let shift = (z_next - z).abs();
            z = z_next;
            // machine-precision dithering: accept once the correction is an
            // ulp-scale shift or has stopped contracting at the 1e-12 level
            if shift <= 1e-14 * z || (shift >= last_shift && shift <= 1e-12 * z) {
                converged = true;
                break;
            }
            last_shift = shift;
        }
        if !converged || !z.is_finite() {
            return Err(Error::Numerical(format!(
                "Newton failed to locate root {i} of the order-{lambda} rule"
            )));
        }
        // compensated polish pins the root to a fraction of an ulp
        for _ in 0..2 {
            let (below, value) = laguerre_pair_dd(lambda, z);
            let deriv = n * value.sub(below).to_f64() / z;
            let z_next = z - value.to_f64() / deriv;
            if z_next.is_finite() && z_next > lower {
                z = z_next;
            }
        }
        // one more recurrence step gives L_{lambda+1}(z)
        let (_, next) = laguerre_pair_dd(lambda + 1, z);
        let next = next.to_f64();
        let scaled_poly = (n + 1.0) * next;
        let log_w = z.ln() - 2.0 * (n + 1.0).ln() - 2.0 * next.abs().ln();
        nodes.push(z);
        // the direct ratio is a couple of ulps; fall back to log space only
        // where the square would overflow
        if scaled_poly.abs() < 1e150 {
            weights.push(z / (scaled_poly * scaled_poly));
        } else {
            weights.push(log_w.exp());
        }
        scaled_weights.push((log_w + z).exp());
    }

    let rule = GaussLaguerreRule {
        nodes,
        weights,
        scaled_weights,
    };
    let zeroth: f64 = rule.weights.iter().sum();
    let first: f64 = rule.integrate(|x| x);
    if (zeroth - 1.0).abs() > 1e-12 || (first - 1.0).abs() > 1e-12 {
        return Err(Error::Numerical(format!(
            "order-{lambda} rule failed moment verification: sum w = {zeroth}, sum w x = {first}"
        )));
    }
    Ok(rule)
}

/// Stepping method for the diffusive node states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteppingMethod {
    BackwardEuler,
    Trapezoidal,
}

impl SteppingMethod {
    pub fn tag(self) -> &'static str {
        match self {
            Self::BackwardEuler => "gl-euler",
            Self::Trapezoidal => "gl-trap",
        }
    }
}

/// The two diffusive node families of the split-and-transform scheme.
#[derive(Debug, Clone)]
pub struct GLIntegratorState {
    /// Nodes r_l = -x_l/(1-alpha), covering the negative half-line.
    left: DiffusiveState,
    /// Nodes r_l = x_l/alpha, covering the positive half-line.
    right: DiffusiveState,
}

impl GLIntegratorState {
    /// Both families zeroed at the problem start time.
    pub fn init(rule: &GaussLaguerreRule, order: FractionalOrder, start_time: f64) -> Self {
        let left_nodes: Vec<DiffusiveNode> = rule
            .nodes()
            .iter()
            .map(|&x| DiffusiveNode::new(-x / order.complement(), order))
            .collect();
        let right_nodes: Vec<DiffusiveNode> = rule
            .nodes()
            .iter()
            .map(|&x| DiffusiveNode::new(x / order.alpha(), order))
            .collect();
        Self {
            left: DiffusiveState::new(left_nodes, start_time),
            right: DiffusiveState::new(right_nodes, start_time),
        }
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

    /// Total persistent scalars (both families).
    pub fn state_count(&self) -> usize {
        self.left.len() + self.right.len()
    }
}

/// Advance both node families to `t_next` with the chosen stepper.
pub fn gl_step(
    state: GLIntegratorState,
    problem: &FractionalProblem,
    t_next: f64,
    method: SteppingMethod,
) -> Result<GLIntegratorState> {
    let step = match method {
        SteppingMethod::BackwardEuler => crate::diffusive::step_backward_euler,
        SteppingMethod::Trapezoidal => crate::diffusive::step_trapezoidal,
    };
    Ok(GLIntegratorState {
        left: step(state.left, problem, t_next)?,
        right: step(state.right, problem, t_next)?,
    })
}

/// The quadrature summation
/// sum_l w_l e^{x_l} [phi_l/(1-alpha) + phi~_l/alpha]
/// over the advanced node families.
pub fn gl_evaluate(state: &GLIntegratorState, rule: &GaussLaguerreRule, order: FractionalOrder) -> f64 {
    let inv_left = 1.0 / order.complement();
    let inv_right = 1.0 / order.alpha();
    rule.scaled_weights()
        .iter()
        .zip(state.left.values().iter().zip(state.right.values()))
        .map(|(&sw, (&phi_left, &phi_right))| sw * (inv_left * phi_left + inv_right * phi_right))
        .sum()
}

/// Evaluate the fractional integral over a grid with the Gauss-Laguerre
/// scheme: O(Lambda) memory, O(Lambda P) operations.
///
/// Under trapezoidal stepping the first grid step uses backward Euler: the
/// trapezoidal damping factor tends to -1 on the stiffest nodes, so a startup
/// transient from the zero initial state would otherwise oscillate without
/// decaying. One L-stable step removes it and leaves the global second order
/// intact.
pub fn run_gl(
    problem: &FractionalProblem,
    grid: &TimeGrid,
    lambda: usize,
    method: SteppingMethod,
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
    let clock = Instant::now();
    let rule = build_rule(lambda)?;
    let order = problem.order();
    let mut state = GLIntegratorState::init(&rule, order, problem.a());
    let state_count = state.state_count();
    let mut values = Vec::with_capacity(grid.len());
    values.push(0.0);
    for (n, &t) in grid.points()[1..].iter().enumerate() {
        let step_method = if n == 0 {
            SteppingMethod::BackwardEuler
        } else {
            method
        };
        state = gl_step(state, problem, t, step_method)?;
        values.push(gl_evaluate(&state, &rule, order));
    }
    Ok(EvaluationTrace::new(
        grid.clone(),
        values,
        method.tag(),
        lambda,
        state_count,
        clock.elapsed().as_secs_f64(),
    ))
}
